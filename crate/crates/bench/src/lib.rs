//! Fixtures shared by the benchmarks.

use nalgebra::{DMatrix, DVector};
use robfolio_core::estimation::sample_moments;
use robfolio_core::market_data::{synth_panel, ReturnsPanel, SynthSpec};
use robfolio_core::models::{MixtureInput, ScenarioSet};

/// A `rows x assets` synthetic window with its sample moments.
pub struct Window {
    pub panel: ReturnsPanel,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub scenarios: ScenarioSet,
    pub mixture: MixtureInput,
}

pub fn window(rows: usize, assets: usize, parts: usize) -> Window {
    let panel = synth_panel(42, rows, assets, &SynthSpec::default());
    let (mu, sigma) = sample_moments(panel.values()).expect("synthetic window has moments");
    let scenarios = ScenarioSet::uniform(panel.values().clone()).expect("uniform scenarios");
    let block = rows / parts;
    let components = (0..parts)
        .map(|k| ScenarioSet::uniform(panel.values().rows(k * block, block).into_owned()).expect("block scenarios"))
        .collect();
    let mixture = MixtureInput::new(components).expect("mixture");
    Window {
        panel,
        mu,
        sigma,
        scenarios,
        mixture,
    }
}
