//! One- and two-qubit Pauli operators with phases dropped.

use std::fmt;

/// A Pauli operator on one or two qubits, phase ignored.
///
/// Bit `2k` is the X component of qubit `k` and bit `2k + 1` its Z component,
/// so `Y` is both bits set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pauli {
    bits: u8,
    qubits: u8,
}

const X_MASK: u8 = 0b0101;
const Z_MASK: u8 = 0b1010;

impl Pauli {
    pub const I: Pauli = Pauli { bits: 0, qubits: 1 };
    pub const X: Pauli = Pauli { bits: 0b01, qubits: 1 };
    pub const Z: Pauli = Pauli { bits: 0b10, qubits: 1 };
    pub const Y: Pauli = Pauli { bits: 0b11, qubits: 1 };

    /// Builds a Pauli from its packed bits. Bits outside the qubit range are dropped.
    pub fn from_bits(bits: u8, qubits: u8) -> Self {
        debug_assert!(qubits == 1 || qubits == 2);
        let mask = if qubits == 1 { 0b11 } else { 0b1111 };
        Pauli {
            bits: bits & mask,
            qubits,
        }
    }

    /// Single-qubit Pauli from explicit flip components.
    pub fn single(x: bool, z: bool) -> Self {
        Pauli::from_bits(u8::from(x) | (u8::from(z) << 1), 1)
    }

    /// Tensor product `a ⊗ b` with `a` on the first qubit.
    pub fn pair(a: Pauli, b: Pauli) -> Self {
        Pauli::from_bits(a.bits | (b.bits << 2), 2)
    }

    pub fn identity(qubits: u8) -> Self {
        Pauli::from_bits(0, qubits)
    }

    pub fn bits(self) -> u8 {
        self.bits
    }

    pub fn qubits(self) -> u8 {
        self.qubits
    }

    pub fn is_identity(self) -> bool {
        self.bits == 0
    }

    pub fn x(self, qubit: usize) -> bool {
        self.bits >> (2 * qubit) & 1 == 1
    }

    pub fn z(self, qubit: usize) -> bool {
        self.bits >> (2 * qubit + 1) & 1 == 1
    }

    /// The X-type part (Y contributes an X).
    pub fn x_part(self) -> Self {
        Pauli::from_bits(self.bits & X_MASK, self.qubits)
    }

    /// The Z-type part (Y contributes a Z).
    pub fn z_part(self) -> Self {
        Pauli::from_bits(self.bits & Z_MASK, self.qubits)
    }

    /// Product up to phase.
    pub fn compose(self, other: Pauli) -> Self {
        debug_assert_eq!(self.qubits, other.qubits);
        Pauli::from_bits(self.bits ^ other.bits, self.qubits)
    }

    /// All non-identity Paulis on `qubits` qubits in bit order.
    pub fn non_identity(qubits: u8) -> impl Iterator<Item = Pauli> {
        (1..(1u8 << (2 * qubits))).map(move |b| Pauli::from_bits(b, qubits))
    }

    fn letter(self, qubit: usize) -> char {
        match (self.x(qubit), self.z(qubit)) {
            (false, false) => 'I',
            (true, false) => 'X',
            (true, true) => 'Y',
            (false, true) => 'Z',
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.qubits as usize {
            write!(f, "{}", self.letter(q))?;
        }
        Ok(())
    }
}
