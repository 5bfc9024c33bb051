use serde::{Deserialize, Serialize};
use std::fmt;

/// A classical bit, always 0 or 1.
pub type Bit = u8;

/// Measurement / preparation basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BasisLabel {
    /// Computational basis {|0⟩, |1⟩}.
    Z,
    /// Hadamard basis {|+⟩, |−⟩}.
    X,
}

impl BasisLabel {
    pub const ALL: [BasisLabel; 2] = [BasisLabel::Z, BasisLabel::X];

    pub fn other(self) -> Self {
        match self {
            BasisLabel::Z => BasisLabel::X,
            BasisLabel::X => BasisLabel::Z,
        }
    }

    /// Z ↦ 0, X ↦ 1. This is the key-bit encoding of a basis choice.
    pub fn index(self) -> Bit {
        match self {
            BasisLabel::Z => 0,
            BasisLabel::X => 1,
        }
    }

    pub fn from_index(bit: Bit) -> Self {
        if bit == 0 {
            BasisLabel::Z
        } else {
            BasisLabel::X
        }
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisLabel::Z => f.write_str("Z"),
            BasisLabel::X => f.write_str("X"),
        }
    }
}

/// One of the four BB84-type single-qubit states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PreparedSymbol {
    Z0,
    Z1,
    XPlus,
    XMinus,
}

impl PreparedSymbol {
    pub const ALL: [PreparedSymbol; 4] = [
        PreparedSymbol::Z0,
        PreparedSymbol::Z1,
        PreparedSymbol::XPlus,
        PreparedSymbol::XMinus,
    ];

    pub fn new(basis: BasisLabel, bit: Bit) -> Self {
        match (basis, bit) {
            (BasisLabel::Z, 0) => PreparedSymbol::Z0,
            (BasisLabel::Z, _) => PreparedSymbol::Z1,
            (BasisLabel::X, 0) => PreparedSymbol::XPlus,
            (BasisLabel::X, _) => PreparedSymbol::XMinus,
        }
    }

    pub fn basis(self) -> BasisLabel {
        match self {
            PreparedSymbol::Z0 | PreparedSymbol::Z1 => BasisLabel::Z,
            PreparedSymbol::XPlus | PreparedSymbol::XMinus => BasisLabel::X,
        }
    }

    /// |0⟩ and |+⟩ carry bit 0; |1⟩ and |−⟩ carry bit 1.
    pub fn bit(self) -> Bit {
        match self {
            PreparedSymbol::Z0 | PreparedSymbol::XPlus => 0,
            PreparedSymbol::Z1 | PreparedSymbol::XMinus => 1,
        }
    }

    /// Dense index in `ALL`, handy for count tables.
    pub fn index(self) -> usize {
        match self {
            PreparedSymbol::Z0 => 0,
            PreparedSymbol::Z1 => 1,
            PreparedSymbol::XPlus => 2,
            PreparedSymbol::XMinus => 3,
        }
    }
}

impl fmt::Display for PreparedSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PreparedSymbol::Z0 => "|0>",
            PreparedSymbol::Z1 => "|1>",
            PreparedSymbol::XPlus => "|+>",
            PreparedSymbol::XMinus => "|->",
        };
        f.write_str(s)
    }
}
