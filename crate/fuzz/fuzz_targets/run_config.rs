#![no_main]

use libfuzzer_sys::fuzz_target;
use rwre_lab::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = Config::from_json(text) {
        let _ = config.model();
        let _ = config.event();
        let _ = config.ladder.as_ref().map(|l| l.values());
    }
});
