//! TOML configuration: scenario distributions, weights, solver options and
//! sweep specification.
//!
//! Every key is optional; anything left out keeps the built-in default.
//! Ranges are written as two-element arrays, e.g. `deadline = [0.3, 7.0]`.

use std::path::Path;

use anyhow::{bail, Context};
use ranfv_core::orchestrator::AdmissionRule;
use ranfv_core::scenario::Bounds;
use ranfv_core::{CostWeights, ScenarioConfig, SolveOptions};
use serde::Deserialize;

use crate::harness::{Parameter, Policy, SweepSpec};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    pub cell_radius_m: Option<f64>,
    pub pathloss_exp: Option<f64>,
    pub noise_w: Option<f64>,
    pub fading_mean: Option<f64>,
    pub num_subcarriers: Option<usize>,
    pub subcarrier_bandwidth_khz: Option<f64>,
    pub max_power_w: Option<f64>,
    pub min_rate: Option<[f64; 2]>,
    pub packet_bits_per_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreSection {
    pub users: Option<[usize; 2]>,
    pub servers: Option<[usize; 2]>,
    pub services: Option<[usize; 2]>,
    pub nfs_per_service: Option<[usize; 2]>,
    pub num_functions: Option<usize>,
    pub cpu_capacity: Option<[f64; 2]>,
    pub storage_capacity: Option<[f64; 2]>,
    pub nf_storage: Option<[f64; 2]>,
    pub cycles_per_bit: Option<[f64; 2]>,
    pub deadline: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostsSection {
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub mu3: Option<f64>,
    pub w: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    Absolute,
    Excess,
}

impl From<RuleName> for AdmissionRule {
    fn from(r: RuleName) -> Self {
        match r {
            RuleName::Absolute => AdmissionRule::Absolute,
            RuleName::Excess => AdmissionRule::Excess,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissionSection {
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub kappa3: Option<f64>,
    pub rule: Option<RuleName>,
    pub eps: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: Option<Parameter>,
    pub values: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub policies: Option<Vec<Policy>>,
    pub timing: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub radio: RadioSection,
    pub core: CoreSection,
    pub costs: CostsSection,
    pub admission: AdmissionSection,
    pub sweep: SweepSection,
}

fn set<T: Copy>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}

fn set_bounds<T: Copy>(dst: &mut Bounds<T>, src: Option<[T; 2]>) {
    if let Some([min, max]) = src {
        *dst = Bounds::new(min, max);
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn weights(&self) -> CostWeights {
        let mut w = CostWeights::default();
        set(&mut w.mu1, self.costs.mu1);
        set(&mut w.mu2, self.costs.mu2);
        set(&mut w.mu3, self.costs.mu3);
        set(&mut w.w, self.costs.w);
        set(&mut w.kappa1, self.admission.kappa1);
        set(&mut w.kappa2, self.admission.kappa2);
        set(&mut w.kappa3, self.admission.kappa3);
        w
    }

    pub fn scenario_config(&self) -> anyhow::Result<ScenarioConfig> {
        let mut c = ScenarioConfig::default();
        let r = &self.radio;
        set(&mut c.cell_radius_m, r.cell_radius_m);
        set(&mut c.pathloss_exp, r.pathloss_exp);
        set(&mut c.noise_w, r.noise_w);
        set(&mut c.fading_mean, r.fading_mean);
        set(&mut c.num_subcarriers, r.num_subcarriers);
        set(&mut c.subcarrier_bandwidth_khz, r.subcarrier_bandwidth_khz);
        set(&mut c.max_power_w, r.max_power_w);
        set(&mut c.packet_bits_per_rate, r.packet_bits_per_rate);
        set_bounds(&mut c.min_rate, r.min_rate);

        let k = &self.core;
        set_bounds(&mut c.users, k.users);
        set_bounds(&mut c.servers, k.servers);
        set_bounds(&mut c.services, k.services);
        set_bounds(&mut c.nfs_per_service, k.nfs_per_service);
        set(&mut c.num_functions, k.num_functions);
        set_bounds(&mut c.cpu_capacity, k.cpu_capacity);
        set_bounds(&mut c.storage_capacity, k.storage_capacity);
        set_bounds(&mut c.nf_storage, k.nf_storage);
        set_bounds(&mut c.cycles_per_bit, k.cycles_per_bit);
        set_bounds(&mut c.deadline, k.deadline);

        c.weights = self.weights();
        c.validate()?;
        Ok(c)
    }

    /// Solver options; the admission rule defaults to [`AdmissionRule::Excess`].
    pub fn solve_options(&self) -> anyhow::Result<SolveOptions> {
        let mut o = SolveOptions { admission: AdmissionRule::Excess, ..SolveOptions::default() };
        set(&mut o.eps, self.admission.eps);
        set(&mut o.max_iter, self.admission.max_iter);
        if let Some(r) = self.admission.rule {
            o.admission = r.into();
        }
        if !(o.eps > 0.0) {
            bail!("admission.eps must be > 0, got {}", o.eps);
        }
        if o.max_iter == 0 {
            bail!("admission.max_iter must be >= 1");
        }
        Ok(o)
    }

    pub fn sweep_spec(&self) -> anyhow::Result<SweepSpec> {
        let s = &self.sweep;
        let mut spec = SweepSpec::new(self.scenario_config()?);
        spec.options = self.solve_options()?;
        set(&mut spec.parameter, s.parameter);
        if let Some(v) = &s.values {
            spec.values = v.clone();
        }
        set(&mut spec.trials, s.trials);
        set(&mut spec.seed, s.seed);
        if let Some(p) = &s.policies {
            spec.policies = p.clone();
        }
        set(&mut spec.timing, s.timing);
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let f = FileConfig::parse("").unwrap();
        assert_eq!(f.scenario_config().unwrap(), ScenarioConfig::default());
        assert_eq!(f.solve_options().unwrap().admission, AdmissionRule::Excess);
    }

    #[test]
    fn sections_override() {
        let f = FileConfig::parse(
            r#"
            [radio]
            max_power_w = 80.0
            min_rate = [2.0, 4.0]
            [core]
            users = [10, 10]
            deadline = [1.0, 2.0]
            [costs]
            mu3 = 20.0
            [admission]
            rule = "absolute"
            kappa1 = 5.0
            max_iter = 10
            [sweep]
            parameter = "deadline"
            values = [0.5, 1.0]
            trials = 3
            policies = ["proposed", "radio-random"]
            "#,
        )
        .unwrap();
        let c = f.scenario_config().unwrap();
        assert_eq!(c.max_power_w, 80.0);
        assert_eq!(c.min_rate, Bounds::new(2.0, 4.0));
        assert_eq!(c.users, Bounds::new(10, 10));
        assert_eq!(c.weights.mu3, 20.0);
        assert_eq!(c.weights.kappa1, 5.0);
        let spec = f.sweep_spec().unwrap();
        assert_eq!(spec.parameter, Parameter::Deadline);
        assert_eq!(spec.trials, 3);
        assert_eq!(spec.policies, vec![Policy::Proposed, Policy::RadioRandom]);
        assert_eq!(spec.options.admission, AdmissionRule::Absolute);
        assert_eq!(spec.options.max_iter, 10);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_ranges() {
        assert!(FileConfig::parse("[radio]\nbogus = 1").is_err());
        let f = FileConfig::parse("[core]\ndeadline = [2.0, 1.0]").unwrap();
        assert!(f.scenario_config().is_err());
        let f = FileConfig::parse("[costs]\nw = 10.0").unwrap();
        assert!(f.scenario_config().is_err());
    }
}
