//! Invariant constraints over instance models.
//!
//! ```text
//! constraints := context*
//! context     := "context" Name invariant+
//! invariant   := "inv" Name ":" expr
//! expr        := or ("implies" or)*
//! or          := and ("or" and)*
//! and         := not ("and" not)*
//! not         := "not" not | cmp
//! cmp         := postfix (("=" | "<>" | "<" | "<=" | ">" | ">=") postfix)?
//! postfix     := atom ("." Name | "->" call)*
//! call        := ("notEmpty" | "isEmpty" | "size") "(" ")"
//!              | ("forAll" | "exists") "(" Name "|" expr ")"
//! atom        := "self" | Name | Int | Real | String | "true" | "false" | "(" expr ")"
//! ```
//!
//! `--` starts a line comment.

use std::fmt;

use serde::Serialize;

use crate::expr::{eval, tokenize, Dialect, Env, Expr, Parser, Pos, SyntaxError, Tok, Val};
use crate::model::InstanceModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Invariant {
    pub name: String,
    pub expr: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub class: String,
    pub invariants: Vec<Invariant>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSet {
    pub contexts: Vec<Context>,
}

impl ConstraintSet {
    pub fn invariant_count(&self) -> usize {
        self.contexts.iter().map(|c| c.invariants.len()).sum()
    }
}

pub fn parse_constraints(text: &str) -> Result<ConstraintSet, SyntaxError> {
    let tokens = tokenize(text, Pos::start())?;
    let mut p = Parser::new(&tokens, Pos::start().advance(text), Dialect::Constraint);
    let mut contexts = Vec::new();
    while !p.is_done() {
        if !p.eat_ident("context") {
            return Err(p.unexpected("`context`"));
        }
        let (class, _) = p.expect_name("a context class name")?;
        let mut invariants: Vec<Invariant> = Vec::new();
        while p.peek_ident("inv") {
            let pos = p.pos();
            p.next();
            let (name, name_pos) = p.expect_name("an invariant name")?;
            if invariants.iter().any(|i| i.name == name) {
                return Err(SyntaxError::new(name_pos, format!("duplicate invariant `{name}` in context `{class}`")));
            }
            p.expect(Tok::Colon, "`:`")?;
            let expr = p.expr()?;
            invariants.push(Invariant { name, expr, pos });
        }
        if invariants.is_empty() {
            return Err(p.unexpected("`inv`"));
        }
        contexts.push(Context { class, invariants });
    }
    Ok(ConstraintSet { contexts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEntry {
    pub context: String,
    pub invariant: String,
    pub object: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub entries: Vec<ReportEntry>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.verdict == Verdict::Pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter().filter(|e| e.verdict != Verdict::Pass)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            write!(f, "{:<5} {}::{} [{}]", e.verdict, e.context, e.invariant, e.object)?;
            if !e.message.is_empty() {
                write!(f, " {}", e.message)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Evaluates every invariant on every object of its context class. A context
/// class that is missing from the metamodel yields one error entry.
pub fn evaluate(cs: &ConstraintSet, m: &InstanceModel) -> ValidationReport {
    let mut entries = Vec::new();
    for context in &cs.contexts {
        if m.metamodel().class(&context.class).is_none() {
            for inv in &context.invariants {
                entries.push(ReportEntry {
                    context: context.class.clone(),
                    invariant: inv.name.clone(),
                    object: String::new(),
                    verdict: Verdict::Error,
                    message: format!("context class `{}` is not in the metamodel", context.class),
                });
            }
            continue;
        }
        for inv in &context.invariants {
            let mut env = Env::new();
            for obj in m.objects_of(&context.class) {
                env.push("self", Val::Obj(obj));
                let result = eval(&inv.expr, &mut env, m);
                env.pop();
                let (verdict, message) = match result {
                    Ok(Val::Bool(true)) => (Verdict::Pass, String::new()),
                    Ok(Val::Bool(false)) => (Verdict::Fail, String::new()),
                    Ok(other) => (
                        Verdict::Error,
                        format!("invariant evaluated to {} instead of Boolean", other.type_name()),
                    ),
                    Err(e) => (Verdict::Error, e.to_string()),
                };
                entries.push(ReportEntry {
                    context: context.class.clone(),
                    invariant: inv.name.clone(),
                    object: obj.id.clone(),
                    verdict,
                    message,
                });
            }
        }
    }
    ValidationReport { entries }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::assets;
    use crate::model::{load_instance, load_metamodel, Value};

    fn aeb() -> InstanceModel {
        let mm = Arc::new(load_metamodel(assets::EVENT_CHAIN_METAMODEL).unwrap());
        load_instance(assets::AEB_INSTANCE, mm).unwrap()
    }

    fn shipped() -> ConstraintSet {
        parse_constraints(assets::EVENT_CHAIN_CONSTRAINTS).unwrap()
    }

    #[test]
    fn shipped_constraints_parse() {
        let cs = shipped();
        assert_eq!(cs.contexts.len(), 1);
        assert_eq!(cs.contexts[0].class, "SoftwareNode");
        let names: Vec<_> = cs.contexts[0].invariants.iter().map(|i| i.name.as_str()).collect();
        assert_eq!(names, ["HasInputAndOutputData", "NextstepFrequencyEqualOrHigher"]);
    }

    #[test]
    fn single_invariant() {
        let cs = parse_constraints("context X inv A: self.y->notEmpty()").unwrap();
        assert_eq!(cs.invariant_count(), 1);
    }

    #[test]
    fn missing_context_is_a_syntax_error() {
        let err = parse_constraints("inv : self.x").unwrap_err();
        assert_eq!((err.pos.line, err.pos.column), (1, 1));
        assert!(parse_constraints("context X").is_err());
        assert!(parse_constraints("context X inv A self.x").is_err());
        let err = parse_constraints("context X\n inv A: self.x\n inv A: self.y").unwrap_err();
        assert_eq!(err.pos.line, 3);
    }

    #[test]
    fn aeb_passes() {
        let report = evaluate(&shipped(), &aeb());
        assert_eq!(report.entries.len(), 8);
        assert!(report.all_pass(), "{report}");
    }

    #[test]
    fn empty_input_fails_named_invariant() {
        let mut b = aeb().to_builder();
        b.get_mut("node:Braking_Decision").unwrap().references.remove("input");
        let report = evaluate(&shipped(), &b.build().unwrap());
        let failures: Vec<_> = report.failures().collect();
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].invariant, "HasInputAndOutputData");
        assert_eq!(failures[0].object, "node:Braking_Decision");
        assert_eq!(failures[0].verdict, Verdict::Fail);
    }

    #[test]
    fn slower_successor_fails() {
        let mut b = aeb().to_builder();
        b.get_mut("node:TTC_Calculation").unwrap().set("frequency", Value::Float(50.0));
        let report = evaluate(&shipped(), &b.build().unwrap());
        let failures: Vec<_> = report.failures().collect();
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].invariant, "NextstepFrequencyEqualOrHigher");
        assert_eq!(failures[0].object, "node:TTC_Calculation");
    }

    #[test]
    fn implies_suppresses_consequent_errors() {
        // The last node has no nextstep; navigating through it would error.
        let cs = parse_constraints(
            "context SoftwareNode
               inv Guarded: self.nextstep->notEmpty() implies self.nextstep.frequency > 0
               inv Unguarded: self.nextstep.frequency > 0",
        )
        .unwrap();
        let report = evaluate(&cs, &aeb());
        let last = |inv: &str| {
            report
                .entries
                .iter()
                .find(|e| e.invariant == inv && e.object == "node:Carla_Vehicle_Control")
                .unwrap()
                .verdict
        };
        assert_eq!(last("Guarded"), Verdict::Pass);
        assert_eq!(last("Unguarded"), Verdict::Error);
    }

    #[test]
    fn type_confusion_is_an_error_verdict() {
        let cs = parse_constraints("context SoftwareNode inv T: self.name > 3").unwrap();
        let report = evaluate(&cs, &aeb());
        assert!(report.entries.iter().all(|e| e.verdict == Verdict::Error));
        let cs = parse_constraints("context SoftwareNode inv N: self.name").unwrap();
        assert!(evaluate(&cs, &aeb()).entries.iter().all(|e| e.verdict == Verdict::Error));
        let cs = parse_constraints("context SoftwareNode inv U: self.bogus = 1").unwrap();
        assert!(evaluate(&cs, &aeb()).entries.iter().all(|e| e.verdict == Verdict::Error));
    }

    #[test]
    fn int_float_comparison_coerces() {
        let cs = parse_constraints("context SoftwareNode inv F: self.frequency = 20").unwrap();
        assert!(evaluate(&cs, &aeb()).all_pass());
    }

    #[test]
    fn iterators_and_size() {
        let cs = parse_constraints(
            "context SoftwareNode
               inv Named: self.input->forAll(d | d.name <> '')
               inv SomeOut: self.output->exists(d | d.topicName <> '')
               inv Small: self.input->size() <= 2 and not self.output->isEmpty()",
        )
        .unwrap();
        assert!(evaluate(&cs, &aeb()).all_pass());
    }

    #[test]
    fn unknown_context_class_reports_error() {
        let cs = parse_constraints("context Sensor inv A: true").unwrap();
        let report = evaluate(&cs, &aeb());
        assert_eq!(report.entries.len(), 1);
        assert_eq!(report.entries[0].verdict, Verdict::Error);
    }
}
