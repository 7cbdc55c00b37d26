#![no_main]

use libfuzzer_sys::fuzz_target;
use rwre_core::env::{build_potential, Environment};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(env) = Environment::from_jsonl(text) {
        let _ = build_potential(&env);
        let _ = env.to_jsonl();
    }
});
