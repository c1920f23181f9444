use std::collections::BTreeMap;

use super::physics::{braking_decision, ttc_calculate};
use super::wiring::NodeSpec;
use super::Scalar;

pub type Outputs<T> = BTreeMap<String, T>;

/// A component's `execute(inputs) -> outputs` contract. Inputs are keyed by
/// the node's declared input names; the returned keys must be exactly the
/// declared output names. State, if any, lives inside the implementor.
pub trait Behavior<T> {
    fn execute(&mut self, inputs: &BTreeMap<String, T>) -> Result<Outputs<T>, String>;
}

impl<T, F> Behavior<T> for F
where
    F: FnMut(&BTreeMap<String, T>) -> Result<Outputs<T>, String>,
{
    fn execute(&mut self, inputs: &BTreeMap<String, T>) -> Result<Outputs<T>, String> {
        self(inputs)
    }
}

pub type BehaviorFactory<T> = Box<dyn Fn(&NodeSpec) -> Result<Box<dyn Behavior<T>>, String>>;

pub struct BehaviorRegistry<T> {
    factories: BTreeMap<String, BehaviorFactory<T>>,
}

impl<T> Default for BehaviorRegistry<T> {
    fn default() -> Self {
        BehaviorRegistry {
            factories: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> BehaviorRegistry<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        key: impl Into<String>,
        factory: impl Fn(&NodeSpec) -> Result<Box<dyn Behavior<T>>, String> + 'static,
    ) -> &mut Self {
        self.factories.insert(key.into(), Box::new(factory));
        self
    }

    pub fn contains(&self, key: &str) -> bool {
        self.factories.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn instantiate(&self, node: &NodeSpec) -> Option<Result<Box<dyn Behavior<T>>, String>> {
        self.factories.get(&node.behavior).map(|f| f(node))
    }

    /// Reference behaviors for the four AEB components. Ports bind by
    /// position, so renamed inputs and outputs still work.
    pub fn reference() -> Self {
        let mut r = Self::new();
        r.register("ObjectDetection", |n| passthrough(n))
            .register("Carla_Vehicle_Control", |n| passthrough(n))
            .register("TTC_Calculation", |n| {
                let (ins, outs) = ports(n, 2, 1)?;
                Ok(Box::new(move |i: &BTreeMap<String, T>| {
                    let ttc = ttc_calculate(get(i, &ins[0])?, get(i, &ins[1])?).map_err(|e| e.to_string())?;
                    Ok(BTreeMap::from([(outs[0].clone(), ttc)]))
                }))
            })
            .register("Braking_Decision", |n| {
                let (ins, outs) = ports(n, 1, 1)?;
                Ok(Box::new(move |i: &BTreeMap<String, T>| {
                    Ok(BTreeMap::from([(outs[0].clone(), braking_decision(get(i, &ins[0])?))]))
                }))
            });
        r
    }
}

fn ports(n: &NodeSpec, ins: usize, outs: usize) -> Result<(Vec<String>, Vec<String>), String> {
    if n.subscriptions.len() != ins || n.publications.len() != outs {
        return Err(format!(
            "expects {ins} input(s) and {outs} output(s), node declares {} and {}",
            n.subscriptions.len(),
            n.publications.len()
        ));
    }
    let names = |v: Vec<&str>| v.into_iter().map(String::from).collect();
    Ok((names(n.input_names()), names(n.output_names())))
}

fn get<T: Scalar>(inputs: &BTreeMap<String, T>, name: &str) -> Result<T, String> {
    inputs.get(name).copied().ok_or_else(|| format!("missing input `{name}`"))
}

fn passthrough<T: Scalar>(n: &NodeSpec) -> Result<Box<dyn Behavior<T>>, String> {
    let (ins, outs) = ports(n, 1, 1)?;
    Ok(Box::new(move |i: &BTreeMap<String, T>| Ok(BTreeMap::from([(outs[0].clone(), get(i, &ins[0])?)]))))
}
