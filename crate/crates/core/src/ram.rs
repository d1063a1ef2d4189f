use std::fmt;

use serde::{Deserialize, Serialize};

pub const RAM_SIZE: usize = 128;

/// The complete mutable state of a game: 128 addressable bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct RamState {
    cells: [u8; RAM_SIZE],
}

impl RamState {
    pub const fn zeroed() -> Self {
        RamState { cells: [0; RAM_SIZE] }
    }

    pub fn from_bytes(cells: [u8; RAM_SIZE]) -> Self {
        RamState { cells }
    }

    /// Builds a RAM image from a slice, which must hold exactly 128 bytes.
    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        let cells: [u8; RAM_SIZE] = bytes.try_into().ok()?;
        Some(RamState { cells })
    }

    #[inline]
    pub fn read(&self, addr: u8) -> u8 {
        self.cells[addr as usize & 0x7f]
    }

    #[inline]
    pub fn write(&mut self, addr: u8, value: u8) {
        self.cells[addr as usize & 0x7f] = value;
    }

    /// Reads a cell as a two's-complement byte.
    #[inline]
    pub fn read_signed(&self, addr: u8) -> i8 {
        self.read(addr) as i8
    }

    #[inline]
    pub fn write_signed(&mut self, addr: u8, value: i8) {
        self.write(addr, value as u8);
    }

    pub fn as_bytes(&self) -> &[u8; RAM_SIZE] {
        &self.cells
    }

    /// Addresses whose values differ between `self` and `other`.
    pub fn diff(&self, other: &RamState) -> Vec<u8> {
        (0..RAM_SIZE as u8)
            .filter(|&a| self.read(a) != other.read(a))
            .collect()
    }
}

impl Default for RamState {
    fn default() -> Self {
        Self::zeroed()
    }
}

impl fmt::Debug for RamState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RamState {{")?;
        for (row, chunk) in self.cells.chunks(16).enumerate() {
            write!(f, "  {:02x}:", row * 16)?;
            for b in chunk {
                write!(f, " {b:02x}")?;
            }
            writeln!(f)?;
        }
        write!(f, "}}")
    }
}

/// Joystick input for one tick. Each game accepts a subset; anything outside
/// that subset is executed as `Noop`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    Noop = 0,
    Fire = 1,
    Up = 2,
    Down = 3,
    Left = 4,
    Right = 5,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::Noop,
        Action::Fire,
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
    ];

    pub fn from_code(code: u8) -> Option<Action> {
        Action::ALL.get(code as usize).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Noop => "NOOP",
            Action::Fire => "FIRE",
            Action::Up => "UP",
            Action::Down => "DOWN",
            Action::Left => "LEFT",
            Action::Right => "RIGHT",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
