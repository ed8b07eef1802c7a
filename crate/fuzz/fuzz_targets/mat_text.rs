#![no_main]

use libfuzzer_sys::fuzz_target;
use linmon::{make_field, Mat};

const QS: [u32; 7] = [2, 3, 4, 5, 7, 8, 9];

// First byte picks the field, the rest is matrix text.
fuzz_target!(|data: &[u8]| {
    let Some((&pick, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let f = make_field(QS[pick as usize % QS.len()], None).unwrap();
    if let Ok(m) = Mat::parse_text(&f, text) {
        assert_eq!(Mat::parse_text(&f, &m.to_text()).unwrap(), m);
        let _ = m.rre();
        let _ = m.rank();
    }
});
