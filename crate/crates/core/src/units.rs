//! Display-unit conversions.
//!
//! Everything inside the crate is strict SI (Pa, K, W, kg/s, m). The helpers
//! here are only used at I/O boundaries: file parsing, CSV export and the
//! display-unit objective.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// One pound-force per square inch in pascal.
pub const PA_PER_PSI: f64 = 6_894.757_293_168_361;
/// Offset between the Celsius and Kelvin scales.
pub const KELVIN_OFFSET: f64 = 273.15;
pub const W_PER_MW: f64 = 1.0e6;

pub fn psi_to_pa(psi: f64) -> f64 {
    psi * PA_PER_PSI
}

pub fn pa_to_psi(pa: f64) -> f64 {
    pa / PA_PER_PSI
}

pub fn celsius_to_kelvin(c: f64) -> f64 {
    c + KELVIN_OFFSET
}

pub fn kelvin_to_celsius(k: f64) -> f64 {
    k - KELVIN_OFFSET
}

pub fn mw_to_w(mw: f64) -> f64 {
    mw * W_PER_MW
}

pub fn w_to_mw(w: f64) -> f64 {
    w / W_PER_MW
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownUnit(pub String);

impl fmt::Display for UnknownUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown unit `{}`", self.0)
    }
}

impl std::error::Error for UnknownUnit {}

/// A family of interchangeable units for one physical quantity.
pub trait Unit: FromStr<Err = UnknownUnit> + Copy {
    /// Name of the quantity, as used in the units block of input files.
    const GROUP: &'static str;
    fn to_si(self, value: f64) -> f64;
    #[allow(clippy::wrong_self_convention)]
    fn from_si(self, value: f64) -> f64;
    fn symbol(self) -> &'static str;
}

macro_rules! unit_enum {
    (
        $(#[$meta:meta])*
        $name:ident ($group:literal) { $( $variant:ident => [$($alias:literal),+], scale = $scale:expr, offset = $offset:expr; )+ }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        pub enum $name {
            $( $variant, )+
        }

        impl $name {
            /// Converts a value expressed in this unit to SI.
            pub fn to_si(self, value: f64) -> f64 {
                match self {
                    $( $name::$variant => value * $scale + $offset, )+
                }
            }

            /// Converts an SI value to this unit.
            pub fn from_si(self, value: f64) -> f64 {
                match self {
                    $( $name::$variant => (value - $offset) / $scale, )+
                }
            }

            /// Canonical spelling used when writing files.
            pub fn symbol(self) -> &'static str {
                match self {
                    $( $name::$variant => unit_enum!(@first $($alias),+), )+
                }
            }
        }

        impl FromStr for $name {
            type Err = UnknownUnit;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $( $($alias)|+ => Ok($name::$variant), )+
                    other => Err(UnknownUnit(other.to_string())),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.symbol())
            }
        }

        impl Unit for $name {
            const GROUP: &'static str = $group;
            fn to_si(self, value: f64) -> f64 {
                $name::to_si(self, value)
            }
            fn from_si(self, value: f64) -> f64 {
                $name::from_si(self, value)
            }
            fn symbol(self) -> &'static str {
                $name::symbol(self)
            }
        }
    };
    (@first $first:literal $(, $rest:literal)*) => { $first };
}

unit_enum! {
    PressureUnit ("pressure") {
        Pa => ["Pa"], scale = 1.0, offset = 0.0;
        KPa => ["kPa"], scale = 1.0e3, offset = 0.0;
        Bar => ["bar"], scale = 1.0e5, offset = 0.0;
        Psi => ["psi"], scale = PA_PER_PSI, offset = 0.0;
    }
}

unit_enum! {
    /// Absolute temperature scales. Only absolute temperatures appear in files;
    /// per-kelvin coefficients are unaffected by the choice.
    TemperatureUnit ("temperature") {
        Kelvin => ["K"], scale = 1.0, offset = 0.0;
        Celsius => ["C", "degC", "°C"], scale = 1.0, offset = KELVIN_OFFSET;
    }
}

unit_enum! {
    PowerUnit ("power") {
        W => ["W"], scale = 1.0, offset = 0.0;
        KW => ["kW"], scale = 1.0e3, offset = 0.0;
        MW => ["MW"], scale = 1.0e6, offset = 0.0;
    }
}

unit_enum! {
    LengthUnit ("length") {
        M => ["m"], scale = 1.0, offset = 0.0;
        Mm => ["mm"], scale = 1.0e-3, offset = 0.0;
        Ft => ["ft"], scale = 0.3048, offset = 0.0;
    }
}

unit_enum! {
    SpecificHeatUnit ("specific_heat") {
        JPerKgK => ["J/(kg*K)", "J/kg/K"], scale = 1.0, offset = 0.0;
        KjPerKgK => ["kJ/(kg*K)", "kJ/kg/K"], scale = 1.0e3, offset = 0.0;
    }
}

unit_enum! {
    LatentHeatUnit ("latent_heat") {
        JPerKg => ["J/kg"], scale = 1.0, offset = 0.0;
        KjPerKg => ["kJ/kg"], scale = 1.0e3, offset = 0.0;
    }
}

unit_enum! {
    DensityUnit ("density") {
        KgPerM3 => ["kg/m3", "kg/m^3"], scale = 1.0, offset = 0.0;
    }
}

unit_enum! {
    HeatLossUnit ("heat_loss") {
        WPerMK => ["W/(m*K)", "W/m/K"], scale = 1.0, offset = 0.0;
    }
}

unit_enum! {
    FlowUnit ("flow") {
        KgPerS => ["kg/s"], scale = 1.0, offset = 0.0;
        TonnePerH => ["t/h"], scale = 1.0 / 3.6, offset = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_conversions() {
        assert!((psi_to_pa(40.0) - 275_790.291_726_7).abs() < 1e-6);
        assert_eq!(celsius_to_kelvin(100.0), 373.15);
        assert_eq!(PowerUnit::MW.to_si(15.14), 15.14e6);
        assert_eq!("psi".parse::<PressureUnit>(), Ok(PressureUnit::Psi));
        assert_eq!("degC".parse::<TemperatureUnit>(), Ok(TemperatureUnit::Celsius));
        assert!("furlong".parse::<LengthUnit>().is_err());
    }

    #[test]
    fn symbols_parse_back() {
        for u in [
            PressureUnit::Pa,
            PressureUnit::KPa,
            PressureUnit::Bar,
            PressureUnit::Psi,
        ] {
            assert_eq!(u.symbol().parse::<PressureUnit>(), Ok(u));
        }
        for u in [TemperatureUnit::Kelvin, TemperatureUnit::Celsius] {
            assert_eq!(u.symbol().parse::<TemperatureUnit>(), Ok(u));
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    proptest! {
        #[test]
        fn psi_round_trip(psi in 1.0e-3f64..1.0e4) {
            prop_assert!(rel(pa_to_psi(psi_to_pa(psi)), psi) <= 1e-9);
        }

        #[test]
        fn celsius_round_trip(c in -50.0f64..400.0) {
            let back = kelvin_to_celsius(celsius_to_kelvin(c));
            // relative to the magnitude of the Kelvin value the offset passes through
            prop_assert!((back - c).abs() <= 1e-9 * c.abs().max(1.0));
        }

        #[test]
        fn unit_enum_round_trip(v in -1.0e6f64..1.0e6) {
            for u in [PressureUnit::Psi, PressureUnit::Bar, PressureUnit::KPa] {
                prop_assert!((u.from_si(u.to_si(v)) - v).abs() <= 1e-9 * v.abs().max(1.0));
            }
            let t = TemperatureUnit::Celsius;
            prop_assert!((t.from_si(t.to_si(v)) - v).abs() <= 1e-9 * v.abs().max(1.0));
        }
    }
}
