#![no_main]

use libfuzzer_sys::fuzz_target;
use orbitspace_cli::config::parse_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = parse_config(data) {
        assert_eq!(cfg.integrals.len(), cfg.dof);
        assert!(cfg.min.iter().zip(&cfg.max).all(|(a, b)| a < b));
    }
});
