//! JSON documents for scenarios, schedules and solve results.

use std::path::Path;

use anyhow::{bail, Context};
use ranfv_core::scenario::validate_scenario;
use ranfv_core::NetworkScenario;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Load a scenario and reject it if any invariant is broken.
pub fn read_scenario(path: &Path) -> anyhow::Result<NetworkScenario> {
    let s: NetworkScenario = read_json(path)?;
    let problems = validate_scenario(&s);
    if !problems.is_empty() {
        bail!("{}: invalid scenario:\n  {}", path.display(), problems.join("\n  "));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ranfv_core::nfv::heuristic_nfv_ra;
    use ranfv_core::scenario::generate_scenario;
    use ranfv_core::{ScenarioConfig, ScheduleAssignment};

    #[test]
    fn scenario_and_schedule_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate_scenario(&ScenarioConfig::default(), 3).unwrap();
        let path = dir.path().join("s.json");
        write_json(&s, &path).unwrap();
        assert_eq!(read_scenario(&path).unwrap(), s);

        let sched = heuristic_nfv_ra(&s, &s.packet_sizes());
        let path = dir.path().join("sched.json");
        write_json(&sched, &path).unwrap();
        assert_eq!(read_json::<ScheduleAssignment>(&path).unwrap(), sched);
    }

    #[test]
    fn invalid_scenario_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = generate_scenario(&ScenarioConfig::default(), 3).unwrap();
        s.channel_gain[0][0] = 0.0;
        let path = dir.path().join("s.json");
        write_json(&s, &path).unwrap();
        let err = read_scenario(&path).unwrap_err().to_string();
        assert!(err.contains("channel_gain"), "{err}");
    }
}
