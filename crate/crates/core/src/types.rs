//! Shared roadway-frame primitives used by every pipeline stage.

use std::fmt;
use std::str::FromStr;

/// Travel direction along the corridor. Eastbound traffic moves toward +x,
/// westbound toward −x; the two directions are tracked as separate spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Eb,
    Wb,
}

impl Direction {
    /// Unit sign of travel along x: +1 for eastbound, −1 for westbound.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Eb => 1.0,
            Direction::Wb => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Eb => "EB",
            Direction::Wb => "WB",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EB" => Ok(Direction::Eb),
            "WB" => Ok(Direction::Wb),
            other => Err(format!("unknown direction {other:?} (expected EB or WB)")),
        }
    }
}

/// The six vehicle classes annotated in the corridor data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VehicleClass {
    Sedan,
    Midsize,
    Van,
    Pickup,
    Semi,
    Truck,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 6] = [
        VehicleClass::Sedan,
        VehicleClass::Midsize,
        VehicleClass::Van,
        VehicleClass::Pickup,
        VehicleClass::Semi,
        VehicleClass::Truck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Sedan => "sedan",
            VehicleClass::Midsize => "midsize",
            VehicleClass::Van => "van",
            VehicleClass::Pickup => "pickup",
            VehicleClass::Semi => "semi",
            VehicleClass::Truck => "truck",
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VehicleClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sedan" => Ok(VehicleClass::Sedan),
            "midsize" => Ok(VehicleClass::Midsize),
            "van" => Ok(VehicleClass::Van),
            "pickup" => Ok(VehicleClass::Pickup),
            "semi" => Ok(VehicleClass::Semi),
            "truck" => Ok(VehicleClass::Truck),
            other => Err(format!("unknown vehicle class {other:?}")),
        }
    }
}

/// An axis-aligned 3D vehicle box in roadway coordinates.
///
/// `(x, y)` is the rear-bottom-center of the vehicle: `x` is the
/// longitudinal position of the rear face, `y` the lateral center of the
/// rear face, and the box sits on the road surface (z = 0) with height
/// `height`. The body extends from the rear face toward the direction of
/// travel, so the longitudinal footprint is `[x, x + length]` for
/// eastbound boxes and `[x − length, x]` for westbound boxes; the lateral
/// footprint is `[y − width/2, y + width/2]` in both cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub x: f64,
    pub y: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub direction: Direction,
    pub class: VehicleClass,
}

impl Box3D {
    /// Footprint rectangle as `(x_min, x_max, y_min, y_max)` in feet.
    pub fn footprint(&self) -> (f64, f64, f64, f64) {
        let (x_min, x_max) = match self.direction {
            Direction::Eb => (self.x, self.x + self.length),
            Direction::Wb => (self.x - self.length, self.x),
        };
        (
            x_min,
            x_max,
            self.y - self.width / 2.0,
            self.y + self.width / 2.0,
        )
    }

    /// Longitudinal position of the front face.
    pub fn front_x(&self) -> f64 {
        self.x + self.direction.sign() * self.length
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn footprint_extends_toward_travel_direction() {
        let eb = Box3D {
            x: 100.0,
            y: 6.0,
            length: 16.0,
            width: 6.0,
            height: 5.0,
            direction: Direction::Eb,
            class: VehicleClass::Sedan,
        };
        assert_eq!(eb.footprint(), (100.0, 116.0, 3.0, 9.0));
        assert_eq!(eb.front_x(), 116.0);

        let wb = Box3D {
            direction: Direction::Wb,
            y: -6.0,
            ..eb
        };
        assert_eq!(wb.footprint(), (84.0, 100.0, -9.0, -3.0));
        assert_eq!(wb.front_x(), 84.0);
    }

    #[test]
    fn direction_and_class_round_trip_through_strings() {
        for d in [Direction::Eb, Direction::Wb] {
            assert_eq!(d.as_str().parse::<Direction>().unwrap(), d);
        }
        for c in VehicleClass::ALL {
            assert_eq!(c.as_str().parse::<VehicleClass>().unwrap(), c);
        }
        assert!("north".parse::<Direction>().is_err());
        assert!("bike".parse::<VehicleClass>().is_err());
    }
}
