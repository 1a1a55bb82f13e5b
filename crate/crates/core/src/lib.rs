//! Distributed wrench-reduction control for teams of mobile manipulators
//! carrying a shared object over delayed communication links.

pub mod comms;
pub mod control;
pub mod harness;
pub mod kinematics;
pub mod sensing;
pub mod stability;
