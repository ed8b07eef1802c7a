#![no_main]

use libfuzzer_sys::fuzz_target;
use linmon::make_field;
use linmon::textfmt::{parse_edges, write_edges};

const QS: [u32; 7] = [2, 3, 4, 5, 7, 8, 9];

fuzz_target!(|data: &[u8]| {
    let Some((&pick, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let f = make_field(QS[pick as usize % QS.len()], None).unwrap();
    if let Ok(blocks) = parse_edges(&f, text) {
        assert_eq!(parse_edges(&f, &write_edges(&blocks)).unwrap(), blocks);
    }
});
