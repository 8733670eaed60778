#![no_main]

use libfuzzer_sys::fuzz_target;
use specpart_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = RunConfig::parse(text) else { return };
    // The effective configuration is written to every run directory and
    // must parse back to itself.
    if let Ok(eff) = cfg.into_effective() {
        let again = RunConfig::parse(&eff.to_toml()).expect("effective config reparses");
        assert_eq!(again, eff);
    }
});
