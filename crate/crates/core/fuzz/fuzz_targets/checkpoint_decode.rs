#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = mhdl::checkpoint::decode(data) {
        // field order in the input is free; the re-encoding is canonical
        let once = mhdl::checkpoint::encode(&c.state, c.aux.as_ref()).expect("decoded state encodes");
        let again = mhdl::checkpoint::decode(&once).expect("canonical bytes decode");
        let twice = mhdl::checkpoint::encode(&again.state, again.aux.as_ref()).unwrap();
        assert_eq!(once, twice);
    }
});
