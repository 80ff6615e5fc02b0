#![no_main]

use libfuzzer_sys::fuzz_target;
use orbitspace::{parse, VariableList};

// Printing a parsed expression and parsing it back is the identity after
// simplification; derivatives must not panic either.
fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let vars = VariableList::canonical(2);
    let Ok(e) = parse(src, &vars) else { return };
    let s = e.simplify();
    let printed = s.display(&vars).to_string();
    // non-finite constants have no literal syntax
    if printed.contains("inf") || printed.contains("NaN") {
        return;
    }
    let back = parse(&printed, &vars).expect("printed expression reparses");
    assert_eq!(back.simplify(), s, "{printed}");
    for v in 0..vars.len() {
        let _ = s.differentiate(v).evaluate(&[0.5, -0.25, 1.5, 2.0]);
    }
});
