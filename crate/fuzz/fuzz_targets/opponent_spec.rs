#![no_main]

libfuzzer_sys::fuzz_target!(|data: &[u8]| {
    let _ = laff::opponents::OpponentSpec::parse_bytes(data);
});
