#![no_main]

use libfuzzer_sys::fuzz_target;
use linmon::make_field;

// First byte is q, the rest are modulus coefficients.
fuzz_target!(|data: &[u8]| {
    let Some((&q, rest)) = data.split_first() else { return };
    let poly: Vec<u32> = rest.iter().map(|&c| c as u32).collect();
    if let Ok(f) = make_field(q as u32, Some(&poly)) {
        for a in f.elements() {
            assert_eq!(f.add(a, f.neg(a)).code(), 0);
            if a.code() != 0 {
                assert_eq!(f.mul(a, f.inv(a).unwrap()).code(), 1);
            }
        }
    }
});
