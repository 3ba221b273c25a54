//! Four-share secret sharing over Z_{2^l} for three-party training that
//! survives the loss of one assistant party.

pub mod bits;
pub mod error;
pub mod fixed;
pub mod matrix;
pub mod ml;
pub mod offline;
pub mod params;
pub mod protocol;
pub mod ring;
pub mod rng;
pub mod share;
pub mod sim;
pub mod transport;
pub mod vsss;

pub use bits::BitVec;
pub use error::{Error, Result};
pub use fixed::FixedPoint;
pub use matrix::Matrix;
pub use offline::{Flavor, Plan, PreprocSource};
pub use params::Params;
pub use protocol::Party;
pub use ring::Ring;
pub use share::{AShare, BShare, LocalShare, Mode, PartyId};
pub use transport::{ChannelStats, MsgKind, Network};
pub use vsss::{CoefficientBundle, PublicMatrix, Restriction, Violation, Vsss};
