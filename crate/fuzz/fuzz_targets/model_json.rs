#![no_main]

use libfuzzer_sys::fuzz_target;
use rwre_core::env::{solve_kappa, EnvironmentModel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = EnvironmentModel::from_json(text) {
        let _ = model.validate_assumptions();
        let _ = solve_kappa(&model);
    }
});
