use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::{
    check_fixture, run_harness, AttackBudget, HarnessSummary, InstanceOutcome, Violation, ATTACK_MAX_BUDGET,
    ATTACK_MAX_DIM,
};

use super::config::{NoiseFamily, RunConfig};
use super::pipeline::Prepared;

#[derive(Debug, Clone, Serialize)]
pub struct OracleCheckReport {
    pub harness: HarnessSummary,
    /// The configured model, scheme and input at every grid budget the
    /// exhaustive attack can afford.
    pub fixtures: Vec<InstanceOutcome>,
    pub fixture_violations: Vec<Violation>,
    /// Why the configured fixture was not checked, if it was not.
    pub fixture_note: Option<String>,
}

impl OracleCheckReport {
    pub fn passed(&self) -> bool {
        self.harness.passed() && self.fixture_violations.is_empty()
    }
}

/// Runs the randomized harness and, for discrete noise, the configured
/// fixture itself.
pub fn run_oracle_check(cfg: &RunConfig) -> Result<OracleCheckReport> {
    let harness = run_harness(&cfg.oracle)?;
    let p = Prepared::new(cfg)?;
    let mut fixtures = Vec::new();
    let mut fixture_violations = Vec::new();
    let family = cfg.smoothing.family;
    let fixture_note = if !family.is_discrete() {
        Some("continuous noise: no exhaustive attack; covered by closed-form identities".to_string())
    } else {
        if p.model.d_in() > ATTACK_MAX_DIM {
            return Err(Error::Capacity(format!(
                "oracle check enumerates inputs of at most {ATTACK_MAX_DIM} dimensions, configuration has {}",
                p.model.d_in()
            )));
        }
        let cap = ATTACK_MAX_BUDGET as f64;
        if p.threat.eps_plus > cap {
            return Err(Error::Capacity(format!("oracle check supports addition budgets up to {ATTACK_MAX_BUDGET}")));
        }
        let budgets: Vec<f64> = p.threat.eps.iter().copied().filter(|&e| e <= cap).collect();
        for (k, &e) in budgets.iter().enumerate() {
            let budget = match family {
                NoiseFamily::Sparsity => AttackBudget::Split { plus: p.threat.eps_plus as usize, minus: e as usize },
                _ => AttackBudget::Total(e as usize),
            };
            let (outcome, violations) = check_fixture(&cfg.oracle, k, &p.model, &p.scheme, &p.input, budget)?;
            fixtures.push(outcome);
            fixture_violations.extend(violations);
        }
        (budgets.len() < p.threat.eps.len())
            .then(|| format!("budgets above {ATTACK_MAX_BUDGET} exceed the exhaustive attack and were skipped"))
    };
    Ok(OracleCheckReport { harness, fixtures, fixture_violations, fixture_note })
}
