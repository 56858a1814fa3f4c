#![no_main]

use colcert::cli_io::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = RunConfig::from_toml_str(text) else { return };
    // Anything accepted must survive a round trip unchanged.
    let again = RunConfig::from_toml_str(&cfg.to_toml_string().expect("serializable")).expect("reparses");
    assert_eq!(cfg, again);
    let _ = cfg.model.build();
});
