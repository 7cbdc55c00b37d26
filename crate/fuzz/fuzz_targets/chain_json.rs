#![no_main]

use libfuzzer_sys::fuzz_target;
use rwre_core::exact::{miclo_bound, IntervalChain};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(chain) = IntervalChain::from_json(text) {
        if chain.check_rows().is_ok() && chain.c() - chain.a() <= 64 {
            let _ = miclo_bound(&chain);
        }
    }
});
