#![no_main]

use libfuzzer_sys::fuzz_target;
use warpgeo::C64;

fuzz_target!(|data: &str| {
    // Paths are relative to a start parameter; a fixed one keeps the input textual.
    let _ = warpgeo::parse_path(data, C64::new(0.0, 0.0));
});
