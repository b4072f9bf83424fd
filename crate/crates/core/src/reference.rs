//! Published reference results for the behaviors this crate simulates,
//! measured on a laboratory search-log study with a hosted LLM driving the
//! agent. They are embedded in evaluation reports as labeled context so
//! local runs can be compared side by side; they are never asserted against,
//! since reproducing them requires that non-redistributable dataset and
//! remote model access.

/// Mean BLEU of generated queries against real ones.
pub const QUERY_BLEU: &[(&str, f64)] = &[
    ("random-selection", 0.1417),
    ("popular-selection", 0.2765),
    ("llm-agent", 0.4630),
];

/// Click prediction: (subject, accuracy, precision, recall, f1).
pub const CLICK_PREDICTION: &[(&str, f64, f64, f64, f64)] = &[
    ("pbm", 0.8082, 0.7605, 0.5131, 0.6040),
    ("ubm", 0.8174, 0.7735, 0.5424, 0.6321),
    ("dbn", 0.8053, 0.8053, 0.4737, 0.5893),
    ("dcm", 0.7823, 0.7640, 0.4152, 0.5292),
    ("pbm-regression", 0.7583, 0.6044, 0.5302, 0.5575),
    ("neural-click-model", 0.7348, 0.5061, 0.5433, 0.5175),
    ("llm-agent", 0.7458, 0.4912, 0.6022, 0.5411),
];

/// Stop prediction: (subject, accuracy, precision, recall, f1).
pub const STOP_PREDICTION: &[(&str, f64, f64, f64, f64)] = &[
    ("fixed-depth", 0.6679, 0.4541, 0.6341, 0.5293),
    ("satisfaction", 0.7361, 0.5780, 0.3841, 0.4615),
    ("frustration", 0.7038, 0.4959, 0.3720, 0.4251),
    ("frustration+satisfaction", 0.7145, 0.5150, 0.5244, 0.5196),
    ("llm-agent", 0.8043, 0.9365, 0.3598, 0.5198),
];

/// Label attached to every reference row in reports.
pub const REFERENCE_LABEL: &str = "published reference (not asserted)";
