//! Deterministic 2D lane-graph traffic simulation.

pub mod lane;
pub mod scenario;
pub mod vehicle;
pub mod world;

pub use lane::{Lane, LaneGraph, LaneGraphError, LaneId, LaneMatch, Polyline};
pub use scenario::{
    AgentKind, LightPhase, NavCommand, NavManeuver, Scenario, ScenarioDoc, ScenarioError, TrafficLight, EGO_ID,
};
pub use vehicle::{step_vehicle, Control, VehicleLimits, VehicleState};
pub use world::{
    route_progress, AccidentInfo, AccidentKind, ActorSnapshot, LightSnapshot, ProgressTracker, World, WorldSnapshot,
};
