#![no_main]

use libfuzzer_sys::fuzz_target;
use specpart_cli::checkpoint::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = Checkpoint::decode(data) {
        let bytes = ckpt.encode();
        let again = Checkpoint::decode(&bytes).expect("re-encoded checkpoint decodes");
        assert_eq!(again.encode(), bytes);
    }
});
