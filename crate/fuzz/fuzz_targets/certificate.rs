#![no_main]

use libfuzzer_sys::fuzz_target;
use linmon::checker::check_certificate_within;
use linmon::presentation::parse_certificate;

// certificate.json, stage1.trace and stage2.edges separated by NUL bytes.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut parts = text.splitn(3, '\0');
    let (Some(json), Some(trace), Some(edges)) = (parts.next(), parts.next(), parts.next()) else { return };
    if let Ok(cert) = parse_certificate(json, trace, edges) {
        let _ = check_certificate_within(&cert, 100_000);
    }
});
