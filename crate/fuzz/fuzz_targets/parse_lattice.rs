#![no_main]

use libfuzzer_sys::fuzz_target;
use orbitspace::fiber::ImageLattice;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(lattice) = src.parse::<ImageLattice>() {
        assert!(lattice.dim() >= 1);
    }
});
