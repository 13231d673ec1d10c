#![no_main]

use kreinreg::sufficiency::{check_conditions, AbstractSpace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(space) = AbstractSpace::from_toml_str(data) else { return };
    assert_eq!(space.neutral.nrows(), space.dim());
    assert_eq!(space.gamma.len(), space.len());
    if space.dim() <= 32 {
        let _ = check_conditions(&space);
    }
});
