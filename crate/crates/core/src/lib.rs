//! Conservation-law classification, simulation and travelling-wave tools for
//! multi-peakon equations `m_t + f(u, u_x) m + (g(u, u_x) m)_x = 0`,
//! `m = u - u_xx`.

pub mod conslaw;
pub mod expr;
pub mod pde;
pub mod twave;
