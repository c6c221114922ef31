//! Versioned JSON documents with explicit units: networks, scenarios and
//! simulation setpoints.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::{read_to_string, IoError, UnitError};
use crate::model::{build_network, CarrierConstants, Load, Network, OperationalBounds, Pipe, Plant, RawNetwork, Side};
use crate::nlp::{Setpoints, VarKey};
use crate::scenario::{BoundOverrides, Scenario};
use crate::units::{
    DensityUnit, FlowUnit, HeatLossUnit, LatentHeatUnit, LengthUnit, PowerUnit, PressureUnit, SpecificHeatUnit,
    TemperatureUnit, Unit,
};

pub const NETWORK_SCHEMA: &str = "tnfo-net/1";
pub const SCENARIO_SCHEMA: &str = "tnfo-scenario/1";
pub const SETPOINTS_SCHEMA: &str = "tnfo-setpoints/1";

/// Unit of each quantity group used in a document. A group only needs an
/// entry when the document contains a value of that group.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specific_heat: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_heat: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heat_loss: Option<String>,
}

impl UnitsBlock {
    /// Strict SI for every group.
    pub fn si() -> UnitsBlock {
        UnitsBlock {
            pressure: Some(PressureUnit::Pa.symbol().into()),
            temperature: Some(TemperatureUnit::Kelvin.symbol().into()),
            power: Some(PowerUnit::W.symbol().into()),
            length: Some(LengthUnit::M.symbol().into()),
            flow: Some(FlowUnit::KgPerS.symbol().into()),
            specific_heat: Some(SpecificHeatUnit::JPerKgK.symbol().into()),
            latent_heat: Some(LatentHeatUnit::JPerKg.symbol().into()),
            density: Some(DensityUnit::KgPerM3.symbol().into()),
            heat_loss: Some(HeatLossUnit::WPerMK.symbol().into()),
        }
    }

    /// Display units: psi, °C and MW.
    pub fn display() -> UnitsBlock {
        UnitsBlock {
            pressure: Some(PressureUnit::Psi.symbol().into()),
            temperature: Some(TemperatureUnit::Celsius.symbol().into()),
            power: Some(PowerUnit::MW.symbol().into()),
            ..UnitsBlock::si()
        }
    }

    fn slot(&self, group: &str) -> &Option<String> {
        match group {
            "pressure" => &self.pressure,
            "temperature" => &self.temperature,
            "power" => &self.power,
            "length" => &self.length,
            "flow" => &self.flow,
            "specific_heat" => &self.specific_heat,
            "latent_heat" => &self.latent_heat,
            "density" => &self.density,
            "heat_loss" => &self.heat_loss,
            _ => unreachable!("unit group `{group}` has no slot"),
        }
    }

    fn unit<U: Unit>(&self, field: &str) -> Result<U, UnitError> {
        let symbol = self.slot(U::GROUP).as_deref().ok_or_else(|| UnitError::Missing {
            field: field.to_string(),
            group: U::GROUP,
        })?;
        symbol.parse::<U>().map_err(|e| UnitError::Unknown {
            field: field.to_string(),
            group: U::GROUP,
            unit: e.0,
        })
    }

    fn to_si<U: Unit>(&self, field: &str, value: f64) -> Result<f64, UnitError> {
        Ok(self.unit::<U>(field)?.to_si(value))
    }

    fn opt_to_si<U: Unit>(&self, field: &str, value: Option<f64>) -> Result<Option<f64>, UnitError> {
        value.map(|v| self.to_si::<U>(field, v)).transpose()
    }

    fn in_declared<U: Unit>(&self, value: f64) -> f64 {
        // writers only use blocks built from valid symbols
        self.unit::<U>("").map(|u| u.from_si(value)).unwrap_or(value)
    }

    /// Checks every declared symbol, including groups with no values.
    fn check_declared(&self) -> Result<(), UnitError> {
        fn check<U: Unit>(b: &UnitsBlock) -> Result<(), UnitError> {
            match b.slot(U::GROUP) {
                Some(_) => b.unit::<U>(&format!("units.{}", U::GROUP)).map(|_| ()),
                None => Ok(()),
            }
        }
        check::<PressureUnit>(self)?;
        check::<TemperatureUnit>(self)?;
        check::<PowerUnit>(self)?;
        check::<LengthUnit>(self)?;
        check::<FlowUnit>(self)?;
        check::<SpecificHeatUnit>(self)?;
        check::<LatentHeatUnit>(self)?;
        check::<DensityUnit>(self)?;
        check::<HeatLossUnit>(self)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_steam: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_steam: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_water: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_heat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_steam: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_water: Option<f64>,
}

/// Operational bounds; absent entries keep their defaults (network files)
/// or the network's values (scenario files).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_ext: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant_outlet_p_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant_inlet_p_min: Option<f64>,
}

impl BoundsBlock {
    fn to_overrides(&self, units: &UnitsBlock) -> Result<BoundOverrides, UnitError> {
        Ok(BoundOverrides {
            t_max: units.opt_to_si::<TemperatureUnit>("bounds.t_max", self.t_max)?,
            t_min: units.opt_to_si::<TemperatureUnit>("bounds.t_min", self.t_min)?,
            t_ext: units.opt_to_si::<TemperatureUnit>("bounds.t_ext", self.t_ext)?,
            p_max: units.opt_to_si::<PressureUnit>("bounds.p_max", self.p_max)?,
            p_min: units.opt_to_si::<PressureUnit>("bounds.p_min", self.p_min)?,
            plant_outlet_p_min: units
                .opt_to_si::<PressureUnit>("bounds.plant_outlet_p_min", self.plant_outlet_p_min)?,
            plant_inlet_p_min: units.opt_to_si::<PressureUnit>("bounds.plant_inlet_p_min", self.plant_inlet_p_min)?,
        })
    }

    fn from_overrides(o: &BoundOverrides, units: &UnitsBlock) -> BoundsBlock {
        let t = |v: Option<f64>| v.map(|v| units.in_declared::<TemperatureUnit>(v));
        let p = |v: Option<f64>| v.map(|v| units.in_declared::<PressureUnit>(v));
        BoundsBlock {
            t_max: t(o.t_max),
            t_min: t(o.t_min),
            t_ext: t(o.t_ext),
            p_max: p(o.p_max),
            p_min: p(o.p_min),
            plant_outlet_p_min: p(o.plant_outlet_p_min),
            plant_inlet_p_min: p(o.plant_inlet_p_min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantRecord {
    pub id: String,
    pub from: String,
    pub to: String,
    pub power_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeRecord {
    pub id: String,
    pub from: String,
    pub to: String,
    pub system: Side,
    pub length: f64,
    pub diameter: f64,
    pub friction_factor: f64,
    pub heat_loss_coeff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_boost_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadRecord {
    pub id: String,
    pub from: String,
    pub to: String,
    pub demand: f64,
}

/// On-disk form of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub schema: String,
    #[serde(default)]
    pub units: UnitsBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsBlock>,
    pub junctions: Vec<String>,
    pub plants: Vec<PlantRecord>,
    pub pipes: Vec<PipeRecord>,
    pub loads: Vec<LoadRecord>,
}

impl NetworkFile {
    /// Converts to SI component lists without validating the topology.
    pub fn to_raw(&self) -> Result<RawNetwork, UnitError> {
        let u = &self.units;
        u.check_declared()?;
        let mut constants = CarrierConstants::default();
        if let Some(c) = &self.constants {
            let fields: [(&mut f64, Option<f64>, &str); 6] = [
                (&mut constants.r_steam, c.r_steam, "r_steam"),
                (&mut constants.c_steam, c.c_steam, "c_steam"),
                (&mut constants.c_water, c.c_water, "c_water"),
                (&mut constants.latent_heat, c.latent_heat, "latent_heat"),
                (&mut constants.rho_steam, c.rho_steam, "rho_steam"),
                (&mut constants.rho_water, c.rho_water, "rho_water"),
            ];
            for (slot, value, name) in fields {
                let Some(v) = value else { continue };
                let field = format!("constants.{name}");
                *slot = match name {
                    "latent_heat" => u.to_si::<LatentHeatUnit>(&field, v)?,
                    "rho_steam" | "rho_water" => u.to_si::<DensityUnit>(&field, v)?,
                    _ => u.to_si::<SpecificHeatUnit>(&field, v)?,
                };
            }
        }
        let bounds = match &self.bounds {
            Some(b) => b.to_overrides(u)?.apply(&OperationalBounds::default()),
            None => OperationalBounds::default(),
        };
        let plants = self
            .plants
            .iter()
            .map(|p| {
                Ok(Plant {
                    id: p.id.clone(),
                    from: p.from.clone(),
                    to: p.to.clone(),
                    power_max: u.to_si::<PowerUnit>(&format!("plants[{}].power_max", p.id), p.power_max)?,
                })
            })
            .collect::<Result<Vec<_>, UnitError>>()?;
        let pipes = self
            .pipes
            .iter()
            .map(|p| {
                let field = |name: &str| format!("pipes[{}].{name}", p.id);
                Ok(Pipe {
                    id: p.id.clone(),
                    from: p.from.clone(),
                    to: p.to.clone(),
                    system: p.system,
                    length: u.to_si::<LengthUnit>(&field("length"), p.length)?,
                    diameter: u.to_si::<LengthUnit>(&field("diameter"), p.diameter)?,
                    friction_factor: p.friction_factor,
                    heat_loss_coeff: u.to_si::<HeatLossUnit>(&field("heat_loss_coeff"), p.heat_loss_coeff)?,
                    pump_boost_max: u
                        .opt_to_si::<PressureUnit>(&field("pump_boost_max"), p.pump_boost_max)?
                        .unwrap_or(0.0),
                })
            })
            .collect::<Result<Vec<_>, UnitError>>()?;
        let loads = self
            .loads
            .iter()
            .map(|l| {
                Ok(Load {
                    id: l.id.clone(),
                    from: l.from.clone(),
                    to: l.to.clone(),
                    demand: u.to_si::<PowerUnit>(&format!("loads[{}].demand", l.id), l.demand)?,
                })
            })
            .collect::<Result<Vec<_>, UnitError>>()?;
        Ok(RawNetwork {
            junctions: self.junctions.clone(),
            pipes,
            plants,
            loads,
            constants,
            bounds,
        })
    }

    /// Document describing `net` in the given units. Constants and bounds
    /// are always written out in full.
    pub fn from_network(net: &Network, units: &UnitsBlock) -> NetworkFile {
        let u = units;
        let c = net.constants();
        let b = net.bounds();
        let bounds = BoundOverrides {
            t_max: Some(b.t_max),
            t_min: Some(b.t_min),
            t_ext: Some(b.t_ext),
            p_max: Some(b.p_max),
            p_min: Some(b.p_min),
            plant_outlet_p_min: Some(b.plant_outlet_p_min),
            plant_inlet_p_min: b.plant_inlet_p_min,
        };
        NetworkFile {
            schema: NETWORK_SCHEMA.into(),
            units: units.clone(),
            constants: Some(ConstantsBlock {
                r_steam: Some(u.in_declared::<SpecificHeatUnit>(c.r_steam)),
                c_steam: Some(u.in_declared::<SpecificHeatUnit>(c.c_steam)),
                c_water: Some(u.in_declared::<SpecificHeatUnit>(c.c_water)),
                latent_heat: Some(u.in_declared::<LatentHeatUnit>(c.latent_heat)),
                rho_steam: Some(u.in_declared::<DensityUnit>(c.rho_steam)),
                rho_water: Some(u.in_declared::<DensityUnit>(c.rho_water)),
            }),
            bounds: Some(BoundsBlock::from_overrides(&bounds, u)),
            junctions: net.junctions().iter().map(|j| j.id.clone()).collect(),
            plants: net
                .plants()
                .iter()
                .map(|p| PlantRecord {
                    id: p.id.clone(),
                    from: p.from.clone(),
                    to: p.to.clone(),
                    power_max: u.in_declared::<PowerUnit>(p.power_max),
                })
                .collect(),
            pipes: net
                .pipes()
                .iter()
                .map(|p| PipeRecord {
                    id: p.id.clone(),
                    from: p.from.clone(),
                    to: p.to.clone(),
                    system: p.system,
                    length: u.in_declared::<LengthUnit>(p.length),
                    diameter: u.in_declared::<LengthUnit>(p.diameter),
                    friction_factor: p.friction_factor,
                    heat_loss_coeff: u.in_declared::<HeatLossUnit>(p.heat_loss_coeff),
                    pump_boost_max: p.has_pump().then(|| u.in_declared::<PressureUnit>(p.pump_boost_max)),
                })
                .collect(),
            loads: net
                .loads()
                .iter()
                .map(|l| LoadRecord {
                    id: l.id.clone(),
                    from: l.from.clone(),
                    to: l.to.clone(),
                    demand: u.in_declared::<PowerUnit>(l.demand),
                })
                .collect(),
        }
    }
}

/// Reads the `schema` tag before anything else so that documents of another
/// version fail with a clear message rather than a field error.
fn parse_versioned<T: serde::de::DeserializeOwned>(text: &str, expected: &'static str) -> Result<T, IoError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IoError::Format(e.to_string()))?;
    let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    if found != expected {
        return Err(IoError::SchemaVersionMismatch {
            expected,
            found: found.to_string(),
        });
    }
    serde_json::from_value(value).map_err(|e| IoError::Format(e.to_string()))
}

fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents contain only finite numbers and strings");
    s.push('\n');
    s
}

pub fn parse_network_str(text: &str) -> Result<Network, IoError> {
    let file: NetworkFile = parse_versioned(text, NETWORK_SCHEMA)?;
    Ok(build_network(file.to_raw()?)?)
}

/// Reads and validates a network document. All values come back in SI.
pub fn parse_network(path: &Path) -> Result<Network, IoError> {
    parse_network_str(&read_to_string(path)?)
}

pub fn network_to_string(net: &Network, units: &UnitsBlock) -> String {
    to_json(&NetworkFile::from_network(net, units))
}

/// On-disk form of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: String,
    #[serde(default)]
    pub units: UnitsBlock,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_multiplier: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub load_multipliers: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub load_demands: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant_capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsBlock>,
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Result<Scenario, UnitError> {
        let u = &self.units;
        u.check_declared()?;
        let load_demands = self
            .load_demands
            .iter()
            .map(|(id, &v)| Ok((id.clone(), u.to_si::<PowerUnit>(&format!("load_demands[{id}]"), v)?)))
            .collect::<Result<BTreeMap<_, _>, UnitError>>()?;
        Ok(Scenario {
            name: self.name.clone(),
            demand_multiplier: self.demand_multiplier,
            load_multipliers: self.load_multipliers.clone(),
            load_demands,
            plant_capacity: u.opt_to_si::<PowerUnit>("plant_capacity", self.plant_capacity)?,
            bounds: match &self.bounds {
                Some(b) => b.to_overrides(u)?,
                None => BoundOverrides::default(),
            },
        })
    }

    pub fn from_scenario(scen: &Scenario, units: &UnitsBlock) -> ScenarioFile {
        let u = units;
        ScenarioFile {
            schema: SCENARIO_SCHEMA.into(),
            units: units.clone(),
            name: scen.name.clone(),
            demand_multiplier: scen.demand_multiplier,
            load_multipliers: scen.load_multipliers.clone(),
            load_demands: scen
                .load_demands
                .iter()
                .map(|(id, &v)| (id.clone(), u.in_declared::<PowerUnit>(v)))
                .collect(),
            plant_capacity: scen.plant_capacity.map(|v| u.in_declared::<PowerUnit>(v)),
            bounds: (!scen.bounds.is_empty()).then(|| BoundsBlock::from_overrides(&scen.bounds, u)),
        }
    }
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, IoError> {
    let file: ScenarioFile = parse_versioned(text, SCENARIO_SCHEMA)?;
    Ok(file.to_scenario()?)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, IoError> {
    parse_scenario_str(&read_to_string(path)?)
}

pub fn scenario_to_string(scen: &Scenario, units: &UnitsBlock) -> String {
    to_json(&ScenarioFile::from_scenario(scen, units))
}

/// Kind of a fixed variable in a setpoints document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetpointVar {
    Pressure,
    Temperature,
    Flow,
    InletTemperature,
    OutletTemperature,
    PumpBoost,
    Excess,
    Unmet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointRecord {
    pub var: SetpointVar,
    pub id: String,
    pub value: f64,
}

impl SetpointRecord {
    fn key(&self) -> VarKey {
        let id = self.id.clone();
        match self.var {
            SetpointVar::Pressure => VarKey::Pressure(id),
            SetpointVar::Temperature => VarKey::Temperature(id),
            SetpointVar::Flow => VarKey::Flow(id),
            SetpointVar::InletTemperature => VarKey::InletTemperature(id),
            SetpointVar::OutletTemperature => VarKey::OutletTemperature(id),
            SetpointVar::PumpBoost => VarKey::PumpBoost(id),
            SetpointVar::Excess => VarKey::Excess(id),
            SetpointVar::Unmet => VarKey::Unmet(id),
        }
    }
}

/// On-disk form of simulation setpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointsFile {
    pub schema: String,
    #[serde(default)]
    pub units: UnitsBlock,
    pub setpoints: Vec<SetpointRecord>,
}

impl SetpointsFile {
    pub fn to_setpoints(&self) -> Result<Setpoints, UnitError> {
        let u = &self.units;
        u.check_declared()?;
        let mut out = Setpoints::default();
        for r in &self.setpoints {
            let key = r.key();
            let field = format!("setpoints[{key}]");
            let v = match r.var {
                SetpointVar::Pressure | SetpointVar::PumpBoost => u.to_si::<PressureUnit>(&field, r.value)?,
                SetpointVar::Temperature | SetpointVar::InletTemperature | SetpointVar::OutletTemperature => {
                    u.to_si::<TemperatureUnit>(&field, r.value)?
                }
                SetpointVar::Flow => u.to_si::<FlowUnit>(&field, r.value)?,
                SetpointVar::Excess | SetpointVar::Unmet => u.to_si::<PowerUnit>(&field, r.value)?,
            };
            out.set(key, v);
        }
        Ok(out)
    }

    pub fn from_setpoints(sp: &Setpoints, units: &UnitsBlock) -> SetpointsFile {
        let u = units;
        let setpoints = sp
            .values
            .iter()
            .map(|(key, v)| {
                let (var, id, value) = match key {
                    VarKey::Pressure(id) => (SetpointVar::Pressure, id, u.in_declared::<PressureUnit>(*v)),
                    VarKey::PumpBoost(id) => (SetpointVar::PumpBoost, id, u.in_declared::<PressureUnit>(*v)),
                    VarKey::Temperature(id) => (SetpointVar::Temperature, id, u.in_declared::<TemperatureUnit>(*v)),
                    VarKey::InletTemperature(id) => {
                        (SetpointVar::InletTemperature, id, u.in_declared::<TemperatureUnit>(*v))
                    }
                    VarKey::OutletTemperature(id) => {
                        (SetpointVar::OutletTemperature, id, u.in_declared::<TemperatureUnit>(*v))
                    }
                    VarKey::Flow(id) => (SetpointVar::Flow, id, u.in_declared::<FlowUnit>(*v)),
                    VarKey::Excess(id) => (SetpointVar::Excess, id, u.in_declared::<PowerUnit>(*v)),
                    VarKey::Unmet(id) => (SetpointVar::Unmet, id, u.in_declared::<PowerUnit>(*v)),
                };
                SetpointRecord {
                    var,
                    id: id.clone(),
                    value,
                }
            })
            .collect();
        SetpointsFile {
            schema: SETPOINTS_SCHEMA.into(),
            units: units.clone(),
            setpoints,
        }
    }
}

pub fn parse_setpoints_str(text: &str) -> Result<Setpoints, IoError> {
    let file: SetpointsFile = parse_versioned(text, SETPOINTS_SCHEMA)?;
    Ok(file.to_setpoints()?)
}

pub fn parse_setpoints(path: &Path) -> Result<Setpoints, IoError> {
    parse_setpoints_str(&read_to_string(path)?)
}

pub fn setpoints_to_string(sp: &Setpoints, units: &UnitsBlock) -> String {
    to_json(&SetpointsFile::from_setpoints(sp, units))
}
