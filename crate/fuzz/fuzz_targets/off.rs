#![no_main]

use libfuzzer_sys::fuzz_target;
use specpart::surface_fem::{parse_obj, parse_off, write_obj};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(mesh) = parse_off(text) else { return };
    // Anything accepted must survive a trip through OBJ.
    let mut buf = Vec::new();
    write_obj(&mesh, &mut buf).unwrap();
    let back = parse_obj(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back.vertex_count(), mesh.vertex_count());
    assert_eq!(back.triangles(), mesh.triangles());
});
