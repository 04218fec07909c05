//! Small shared types and unit helpers.

use serde::{Deserialize, Serialize};

/// One radian expressed in degrees times this constant gives radians.
pub const DEG: f64 = std::f64::consts::PI / 180.0;

/// Convert radians to degrees.
pub fn to_deg(rad: f64) -> f64 {
    rad / DEG
}

/// Convert degrees to radians.
pub fn to_rad(deg: f64) -> f64 {
    deg * DEG
}

/// Leg side. Also indexes per-leg data: left = 0, right = 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// Index of this leg's hip in the joint vector [hipL, kneeL, hipR, kneeR].
    pub fn hip(self) -> usize {
        2 * self.index()
    }

    /// Index of this leg's knee in the joint vector.
    pub fn knee(self) -> usize {
        2 * self.index() + 1
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

/// One of the two coupled users.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UserId {
    A,
    B,
}

impl UserId {
    pub const BOTH: [UserId; 2] = [UserId::A, UserId::B];

    pub fn index(self) -> usize {
        match self {
            UserId::A => 0,
            UserId::B => 1,
        }
    }

    pub fn other(self) -> UserId {
        match self {
            UserId::A => UserId::B,
            UserId::B => UserId::A,
        }
    }
}

impl std::fmt::Display for UserId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UserId::A => write!(f, "A"),
            UserId::B => write!(f, "B"),
        }
    }
}
