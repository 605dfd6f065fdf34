//! Intensity histogram CSV: parsing must never panic, and the writer's
//! canonical form must be a fixed point of parse + write.

#![no_main]

use gazebench::formats::csvio;
use gazebench::tracelab::IntensityHistogram;
use libfuzzer_sys::fuzz_target;

fn render(series: &[(String, IntensityHistogram)]) -> String {
    let borrowed: Vec<(&str, &IntensityHistogram)> =
        series.iter().map(|(name, hist)| (name.as_str(), hist)).collect();
    csvio::histograms_to_csv(&borrowed)
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(series) = csvio::histograms_from_csv(text) {
        let rendered = render(&series);
        let again = csvio::histograms_from_csv(&rendered).expect("written histograms must parse");
        assert_eq!(rendered, render(&again));
    }
});
