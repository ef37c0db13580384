#![no_main]

libfuzzer_sys::fuzz_target!(|data: &[u8]| {
    let _ = laff::BimatrixGame::from_json(data);
});
