#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = mhdl::output::Manifest::parse_bytes(data) {
        let back = mhdl::output::Manifest::parse(&m.to_text()).expect("own output parses");
        assert_eq!(back, m);
    }
});
