#![no_main]

use colcert::cli_io::SampleSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(set) = SampleSet::read_csv(data) else { return };
    let mut buf = Vec::new();
    set.write_csv(&mut buf).expect("in-memory write");
    assert_eq!(SampleSet::read_csv(buf.as_slice()).expect("reparses"), set);
});
