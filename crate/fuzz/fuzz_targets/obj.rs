#![no_main]

use libfuzzer_sys::fuzz_target;
use specpart::surface_fem::parse_obj;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mesh) = parse_obj(text) {
            let _ = mesh.euler_characteristic();
        }
    }
});
