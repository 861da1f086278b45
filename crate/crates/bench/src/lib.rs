//! Fixtures shared by the benchmarks.

use nafdyn::exact::dvr::{gaussian_wavepacket, DvrGrid, DvrHamiltonian};
use nafdyn::model::{ModelConfig, ModelSpec};
use nafdyn::propagation::initialize;
use nafdyn::{MethodOptions, PhaseSpacePoint, Representation, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Builds a model from a `[model]` table body.
pub fn model(table: &str) -> ModelSpec {
    let cfg: ModelConfig = toml::from_str(table).expect("valid model table");
    cfg.build().expect("model builds")
}

pub fn tully_sac() -> ModelSpec {
    model("kind = \"tully\"\nvariant = \"sac\"\np0 = 20.0")
}

/// Spin-boson model with `n_modes` bath modes.
pub fn spin_boson(n_modes: usize) -> ModelSpec {
    model(&format!("kind = \"spin-boson\"\nn_modes = {n_modes}"))
}

/// An initialized trajectory state.
pub fn trajectory(model: &ModelSpec, opts: &MethodOptions, seed: u64) -> PhaseSpacePoint {
    initialize(model, opts, &mut ChaCha8Rng::seed_from_u64(seed)).expect("initial state").0
}

/// ECR grid Hamiltonian with `n` points and its initial wavepacket.
pub fn dvr_ecr(n: usize) -> (DvrHamiltonian, Vec<C64>) {
    let m = model("kind = \"tully\"\nvariant = \"ecr\"\np0 = 20.0");
    let h = DvrHamiltonian::new(&m, DvrGrid::new(-40.0, 40.0, n, 2000.0).expect("grid")).expect("hamiltonian");
    let psi = gaussian_wavepacket(&h, -13.0, 20.0, 1.0, 0, Representation::Adiabatic).expect("wavepacket").psi;
    (h, psi)
}
