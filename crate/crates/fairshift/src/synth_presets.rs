//! Named cohort specifications for `synth --preset`.

use clap::ValueEnum;
use fairshift_core::synth::CohortSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Sepsis-like menu without disparity.
    Default,
    /// Label noise in group 0 at flip rate 0.3.
    Biased,
    /// One feature carries all group disparity.
    FeatureShift,
}

impl Preset {
    pub fn spec(self, n: usize, seed: u64) -> CohortSpec {
        match self {
            Preset::Default => CohortSpec::sepsis_default(n, seed),
            Preset::Biased => CohortSpec::biased_default(n, seed),
            Preset::FeatureShift => CohortSpec::mediated_default(n, seed),
        }
    }
}
