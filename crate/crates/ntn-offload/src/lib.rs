//! Joint task-offloading and airtime allocation for a maritime
//! non-terrestrial network.
//!
//! A fleet of hybrid user equipments (HUEs) on the sea surface shares one
//! uplink frame: each HUE either computes its sensed data locally or
//! offloads it to a LEO edge server, while a relay UAV forwards backhaul
//! traffic over the same frame. The optimizer maximizes the weighted sum
//! rate by searching the binary offload decisions with an accumulating
//! cut model and solving the continuous airtime split as a linear
//! program. Brute-force and random baselines plus a seeded experiment
//! harness round out the crate.

pub mod baselines;
pub mod benders;
pub mod harness;
pub mod lp;
pub mod physics;
pub mod primal;
