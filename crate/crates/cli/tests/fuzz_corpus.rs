//! Replays the checked-in fuzz corpus through the same entry points as the
//! fuzz targets, so every seed is exercised by a plain `cargo test`.

use std::path::{Path, PathBuf};

use rwre_core::env::{build_potential, solve_kappa, Environment, EnvironmentModel};
use rwre_core::exact::{miclo_bound, IntervalChain};
use rwre_lab::Config;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn model_json_seeds() {
    let mut parsed = 0;
    for (_, text) in seeds("model_json") {
        if let Ok(model) = EnvironmentModel::from_json(&text) {
            let _ = model.validate_assumptions();
            let _ = solve_kappa(&model);
            parsed += 1;
        }
    }
    assert!(parsed >= 4);
}

#[test]
fn env_jsonl_seeds() {
    for (path, text) in seeds("env_jsonl") {
        match Environment::from_jsonl(&text) {
            Ok(env) => {
                let _ = build_potential(&env);
                assert_eq!(Environment::from_jsonl(&env.to_jsonl()).unwrap(), env, "{}", path.display());
            }
            Err(e) => assert!(path.ends_with("gap"), "{}: {e}", path.display()),
        }
    }
}

#[test]
fn chain_json_seeds() {
    for (path, text) in seeds("chain_json") {
        let chain = IntervalChain::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let rows_ok = chain.check_rows().is_ok();
        assert_eq!(rows_ok, !path.ends_with("bad_kernel"), "{}", path.display());
        if rows_ok {
            assert!(miclo_bound(&chain).lower > 0.0);
        }
    }
}

#[test]
fn run_config_seeds() {
    for (path, text) in seeds("run_config") {
        let config = Config::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let _ = config.model();
        let _ = config.event();
        if let Some(l) = &config.ladder {
            assert!(!l.values().unwrap().is_empty());
        }
    }
}
