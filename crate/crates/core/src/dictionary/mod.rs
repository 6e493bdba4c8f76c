//! Hermite-wavelet atoms and the convolutional dictionary operator.

mod operator;
mod wavelet;

pub use operator::{build_ideal_dictionary, BoundaryMode, DictionaryOperator};
pub use wavelet::{
    atom_energy_unnormalized, closed_form_energy, half_width, hermite_wavelet, quadrature_energy,
    sample_atom, DictionarySpec, HermiteWavelet, WaveletAtom,
};
