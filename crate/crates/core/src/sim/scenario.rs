use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::behavior::{Behavior, BehaviorRegistry};
use super::physics::ttc_calculate;
use super::wiring::NodeGraph;
use super::{lit, Scalar, SimError};

/// Topic/field pairs through which the world talks to the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldTopics {
    pub distance: (String, String),
    pub speed: (String, String),
    pub brake: (String, String),
}

impl Default for WorldTopics {
    fn default() -> Self {
        let pair = |t: &str, f: &str| (t.to_string(), f.to_string());
        WorldTopics {
            distance: pair("/carla/ego_vehicle/lidar", "data"),
            speed: pair("/carla/ego_vehicle/vehicle_status", "velocity"),
            brake: pair("/carla/ego_vehicle/vehicle_control_cmd", "brake"),
        }
    }
}

impl WorldTopics {
    pub fn published(&self) -> Vec<String> {
        vec![self.distance.0.clone(), self.speed.0.clone()]
    }
}

/// Ego approaching a stationary obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct AebScenario<T> {
    pub v0: T,
    pub d0: T,
    pub a_max: T,
    pub dt: T,
    pub duration: T,
    pub sensor_hz: T,
    /// Below this speed an applied brake holds the vehicle at standstill.
    /// Zero disables the hold.
    pub hold_speed: T,
    pub world: WorldTopics,
}

impl<T: Scalar> AebScenario<T> {
    pub fn new(v0: T, d0: T) -> Self {
        AebScenario {
            v0,
            d0,
            a_max: lit(8.0),
            dt: lit(0.01),
            duration: lit(20.0),
            sensor_hz: lit(20.0),
            hold_speed: lit(0.1),
            world: WorldTopics::default(),
        }
    }

    fn validate(&self, graph: &NodeGraph) -> Result<(), SimError> {
        let fields = [
            ("v0", self.v0),
            ("d0", self.d0),
            ("a_max", self.a_max),
            ("dt", self.dt),
            ("sensor_hz", self.sensor_hz),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > T::zero()) {
                return Err(SimError::InvalidScenario(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.hold_speed.is_finite() && self.hold_speed >= T::zero()) {
            return Err(SimError::InvalidScenario(format!("hold_speed must be >= 0, got {}", self.hold_speed)));
        }
        if !(self.duration.is_finite() && self.duration >= T::zero()) {
            return Err(SimError::InvalidScenario(format!("duration must be >= 0, got {}", self.duration)));
        }
        let max_hz = graph
            .max_frequency()
            .map(lit::<T>)
            .map_or(self.sensor_hz, |f| f.max(self.sensor_hz));
        let bound = T::one() / (lit::<T>(2.0) * max_hz);
        if self.dt > bound + lit(1e-12) {
            return Err(SimError::InvalidScenario(format!(
                "dt {} exceeds half the fastest period ({bound})",
                self.dt
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Message<T> {
    pub seq: u64,
    pub time: T,
    pub topic: String,
    pub payload: BTreeMap<String, T>,
}

/// World state at the start of a tick and the brake command applied during it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord<T> {
    pub time: T,
    pub speed: T,
    pub gap: T,
    pub ttc: T,
    pub brake_force: T,
    pub messages: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct NodeMetrics {
    pub frequency: f64,
    pub activations: u64,
    pub skipped: u64,
    /// Largest age in seconds of the oldest input at an activation.
    pub max_input_age: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTrace<T> {
    pub records: Vec<TickRecord<T>>,
    pub messages: Vec<Message<T>>,
    pub metrics: BTreeMap<String, NodeMetrics>,
    pub final_speed: T,
    pub final_gap: T,
    pub collided: bool,
}

impl<T: Scalar> ScenarioTrace<T> {
    pub fn stopped(&self) -> bool {
        self.final_speed == T::zero()
    }

    pub fn brake_in_range(&self) -> bool {
        self.records
            .iter()
            .all(|r| r.brake_force >= T::zero() && r.brake_force <= T::one())
    }

    /// Time of the first tick with a nonzero brake command.
    pub fn engagement(&self) -> Option<&TickRecord<T>> {
        self.records.iter().find(|r| r.brake_force > T::zero())
    }

    /// Stopped short of the obstacle with every brake command normalized.
    pub fn safe(&self) -> bool {
        self.stopped() && !self.collided && self.final_gap > T::zero() && self.brake_in_range()
    }
}

struct Clock<T> {
    hz: T,
    fired: u64,
}

impl<T: Scalar> Clock<T> {
    fn due(&self, t: T) -> bool {
        let next = T::from_u64(self.fired).expect("count fits") / self.hz;
        t + lit(1e-9) >= next
    }
}

struct Live<T> {
    behavior: Box<dyn Behavior<T>>,
    clock: Clock<T>,
}

fn publish<T>(log: &mut Vec<Message<T>>, latest: &mut BTreeMap<String, usize>, time: T, topic: &str, payload: BTreeMap<String, T>) {
    latest.insert(topic.to_string(), log.len());
    log.push(Message {
        seq: log.len() as u64,
        time,
        topic: topic.to_string(),
        payload,
    });
}

/// Runs the scenario tick by tick. Within a tick the world publishes first,
/// then due nodes fire in chain order reading the latest message per topic,
/// then the world applies the latest brake command.
pub fn run_scenario<T: Scalar>(
    graph: &NodeGraph,
    behaviors: &BehaviorRegistry<T>,
    sc: &AebScenario<T>,
) -> Result<ScenarioTrace<T>, SimError> {
    sc.validate(graph)?;
    let mut live = Vec::with_capacity(graph.nodes.len());
    let mut metrics = BTreeMap::new();
    for node in &graph.nodes {
        let behavior = behaviors
            .instantiate(node)
            .ok_or_else(|| SimError::UnresolvedBehavior {
                node: node.name.clone(),
                key: node.behavior.clone(),
            })?
            .map_err(|message| SimError::Behavior {
                node: node.name.clone(),
                message,
            })?;
        live.push(Live {
            behavior,
            clock: Clock {
                hz: lit(node.frequency),
                fired: 0,
            },
        });
        metrics.insert(
            node.name.clone(),
            NodeMetrics {
                frequency: node.frequency,
                ..NodeMetrics::default()
            },
        );
    }

    let ticks = (sc.duration / sc.dt + lit(1e-9)).floor().to_u64().unwrap_or(0);
    let mut sensor = Clock { hz: sc.sensor_hz, fired: 0 };
    let mut latest: BTreeMap<String, usize> = BTreeMap::new();
    let mut log: Vec<Message<T>> = Vec::new();
    let mut records = Vec::new();
    let (mut v, mut gap) = (sc.v0, sc.d0);
    let mut collided = false;

    for k in 0..ticks {
        let t = T::from_u64(k).expect("tick fits") * sc.dt;
        let before = log.len();
        if sensor.due(t) {
            sensor.fired += 1;
            let w = &sc.world;
            publish(&mut log, &mut latest, t, &w.distance.0, BTreeMap::from([(w.distance.1.clone(), gap)]));
            publish(&mut log, &mut latest, t, &w.speed.0, BTreeMap::from([(w.speed.1.clone(), v)]));
        }
        for (node, l) in graph.nodes.iter().zip(live.iter_mut()) {
            if !l.clock.due(t) {
                continue;
            }
            l.clock.fired += 1;
            let m = metrics.get_mut(&node.name).expect("metrics per node");
            let mut inputs = BTreeMap::new();
            let mut oldest = t;
            for s in &node.subscriptions {
                let msg = latest.get(&s.topic).map(|&i| &log[i]);
                match msg.and_then(|msg| msg.payload.get(&s.field).map(|x| (msg.time, *x))) {
                    Some((stamp, x)) => {
                        oldest = oldest.min(stamp);
                        inputs.insert(s.name.clone(), x);
                    }
                    None => break,
                }
            }
            if inputs.len() < node.subscriptions.len() {
                log::warn!("{}: msg not received at t={t}", node.name);
                m.skipped += 1;
                continue;
            }
            m.activations += 1;
            let age = (t - oldest).to_f64().unwrap_or(f64::NAN);
            m.max_input_age = Some(m.max_input_age.map_or(age, |a: f64| a.max(age)));

            let outputs = l.behavior.execute(&inputs).map_err(|message| SimError::Behavior {
                node: node.name.clone(),
                message,
            })?;
            let declared: BTreeSet<&str> = node.output_names().into_iter().collect();
            let got: BTreeSet<&str> = outputs.keys().map(String::as_str).collect();
            if declared != got {
                return Err(SimError::Contract {
                    node: node.name.clone(),
                    message: format!("returned keys {got:?}, declared outputs are {declared:?}"),
                });
            }
            let mut by_topic: BTreeMap<&str, BTreeMap<String, T>> = BTreeMap::new();
            let mut order = Vec::new();
            for p in &node.publications {
                if !by_topic.contains_key(p.topic.as_str()) {
                    order.push(p.topic.as_str());
                }
                by_topic
                    .entry(&p.topic)
                    .or_default()
                    .insert(p.field.clone(), outputs[&p.name]);
            }
            for topic in order {
                let payload = by_topic.remove(topic).expect("grouped");
                publish(&mut log, &mut latest, t, topic, payload);
            }
        }

        let (brake_topic, brake_field) = &sc.world.brake;
        let command = latest
            .get(brake_topic)
            .and_then(|&i| log[i].payload.get(brake_field).copied())
            .unwrap_or_else(T::zero);
        // The actuator saturates; out-of-range commands still show in the trace.
        let applied = if command.is_nan() {
            T::zero()
        } else {
            command.max(T::zero()).min(T::one())
        };
        records.push(TickRecord {
            time: t,
            speed: v,
            gap,
            ttc: ttc_calculate(gap.max(T::zero()), v).expect("clamped gap"),
            brake_force: command,
            messages: log.len() - before,
        });
        v = (v - applied * sc.a_max * sc.dt).max(T::zero());
        if applied > T::zero() && v < sc.hold_speed {
            v = T::zero();
        }
        gap = gap - v * sc.dt;
        if gap <= T::zero() {
            collided = true;
            break;
        }
        if v == T::zero() {
            break;
        }
    }

    Ok(ScenarioTrace {
        records,
        messages: log,
        metrics,
        final_speed: v,
        final_gap: gap,
        collided,
    })
}
