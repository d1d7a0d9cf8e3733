#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = mhdl::config::parse_config_bytes(data) {
        // whatever parses must survive its canonical form
        let again = mhdl::config::parse_config(&cfg.to_ini()).expect("canonical form parses");
        assert_eq!(again.to_ini(), cfg.to_ini());
    }
});
