#![no_main]

use libfuzzer_sys::fuzz_target;
use orbitspace::{parse, VariableList};

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        let vars = VariableList::canonical(3);
        if let Err(e) = parse(src, &vars) {
            assert!(e.position() <= src.len());
        }
    }
});
