#![no_main]

libfuzzer_sys::fuzz_target!(|data: &[u8]| {
    let _ = laff::io::parse_trace(data);
});
