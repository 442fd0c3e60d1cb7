//! Optimality certificates and exact-recovery conditions.

mod conditions;
mod dual;
mod farkas;
mod kkt;

pub use conditions::{
    cnk_bound, cnk_polynomial, complete_homogeneous, eigen_condition, krylov_basis, lemma2_condition,
    span_condition, EigenCondition, Lemma2, SpanCheck,
};
pub use dual::{dual_min_fz, for_each_net_point, net_size, DualSearch, NET_BUDGET};
pub use farkas::{farkas_feasible, farkas_feasible_with, fz, Certificate, FarkasOptions, Verdict, Witness};
pub use kkt::{default_support_tol, directional_derivative, kkt_certificate, CoordinateCheck, KktCertificate, KktOptions};
