#![no_main]

use libfuzzer_sys::fuzz_target;
use linmon::textfmt::PresentationFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(pf) = PresentationFile::parse(text) {
        assert_eq!(PresentationFile::parse(&pf.to_text()).unwrap(), pf);
    }
});
