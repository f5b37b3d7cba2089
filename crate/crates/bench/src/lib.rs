//! Input sizes shared by the criterion benches.

use chrg::scaling::{BenchClass, BLOWUP_CAP};

/// Sizes measured for each class; blowup stays within its cap.
pub fn sizes(class: BenchClass) -> &'static [usize] {
    match class {
        BenchClass::Unambiguous => &[64, 128, 256, 512],
        BenchClass::Ambiguous => &[8, 16, 32],
        BenchClass::Blowup => &[4, 6, 8, BLOWUP_CAP],
    }
}
