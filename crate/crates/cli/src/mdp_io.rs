//! Tabular MDP files: nested `[s][a][s']` arrays in JSON.

use std::path::Path;

use anyhow::{anyhow, Context};
use pgrad_core::TabularMdp;

pub const BUILTIN_PREFIX: &str = "builtin:";

/// 2 states, 2 actions, horizon 4, γ = 0.9.
pub const TWO_STATE: &str = include_str!("../data/mdp_2state.json");
/// 5 states, 3 actions, infinite horizon, γ = 0.9.
pub const FIVE_STATE: &str = include_str!("../data/mdp_5state.json");

pub fn parse_mdp(json: &str) -> anyhow::Result<TabularMdp> {
    Ok(serde_json::from_str(json)?)
}

pub fn two_state() -> TabularMdp {
    parse_mdp(TWO_STATE).expect("shipped two-state MDP is valid")
}

pub fn five_state() -> TabularMdp {
    parse_mdp(FIVE_STATE).expect("shipped five-state MDP is valid")
}

/// Loads a JSON file, or one of `builtin:two_state` and `builtin:five_state`.
pub fn load_mdp(source: &str) -> anyhow::Result<TabularMdp> {
    if let Some(name) = source.strip_prefix(BUILTIN_PREFIX) {
        return match name {
            "two_state" => Ok(two_state()),
            "five_state" => Ok(five_state()),
            _ => Err(anyhow!(
                "unknown builtin MDP {name:?} (expected two_state or five_state)"
            )),
        };
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_mdp(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn save_mdp(mdp: &TabularMdp, path: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(mdp)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_instances_load() {
        let a = two_state();
        assert_eq!((a.n_states(), a.n_actions(), a.horizon()), (2, 2, Some(4)));
        let b = five_state();
        assert_eq!((b.n_states(), b.n_actions(), b.horizon()), (5, 3, None));
        assert!(load_mdp("builtin:nine_state").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_mdp(&five_state(), &path).unwrap();
        assert_eq!(load_mdp(path.to_str().unwrap()).unwrap(), five_state());
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let bad = TWO_STATE.replace("[0.8, 0.2]", "[0.8, 0.3]");
        assert!(parse_mdp(&bad).is_err());
        let bad = TWO_STATE.replace("\"gamma\"", "\"gama\"");
        assert!(parse_mdp(&bad).is_err());
    }
}
