//! Filter-bank + CSP transformation stage.

mod csp;
mod filter;

pub use csp::{
    apply_csp, class_covariance, csp_pair, epoch_covariance, fit_csp, transform_epoch, transform_set, CspModel, CspPair,
    CspScheme,
};
pub use filter::{
    apply_filter_bank, design_bandpass, filtfilt, frequency_response, Biquad, FilterBankSpec, SosFilter,
};
