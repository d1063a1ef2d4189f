//! Declarative RAM patches.
//!
//! A [`PatchSpec`] is an ordered list of rules. Each rule names a trigger
//! (`on_reset`, `pre_step`, `post_step`), an optional conjunction of
//! comparisons over RAM cells, and one effect. Rules run in list order and
//! later rules see earlier rules' writes; conflicting writes resolve to the
//! last writer.
//!
//! Patch document (JSON):
//!
//! ```json
//! {"name":"lazy_enemy","game":"paddleball","rules":[
//!   {"when":"post_step","if":[{"cell":4,"op":"gt","value":0,"signed":true}],
//!    "do":{"kind":"hold","cell":1}}]}
//! ```
//!
//! An atom compares against either a constant (`"value"`) or another cell
//! (`"other"`). Effects: `set {cell, value}`, `copy {dst, src}`,
//! `add {cell, delta}` (wrapping) and `hold {cell}`, which writes back the
//! value the cell had at the end of the previous tick.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::Frame;
use crate::games::Game;
use crate::machine::{Env, Machine, MachineError, Snapshot, TickResult};
use crate::ram::{Action, RamState, RAM_SIZE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatchError {
    #[error("patch parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid patch at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("patch '{patch}' targets game '{patch_game}', machine runs '{machine_game}'")]
    GameMismatch {
        patch: String,
        patch_game: String,
        machine_game: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    OnReset,
    PreStep,
    PostStep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    fn eval(self, lhs: i16, rhs: i16) -> bool {
        match self {
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operand {
    /// A constant, already range-checked for the atom's signedness.
    Const(i16),
    Cell(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Atom {
    pub cell: u8,
    pub op: Comparator,
    pub operand: Operand,
    pub signed: bool,
}

impl Atom {
    fn load(&self, ram: &RamState, addr: u8) -> i16 {
        if self.signed {
            ram.read_signed(addr) as i16
        } else {
            ram.read(addr) as i16
        }
    }

    pub fn holds(&self, ram: &RamState) -> bool {
        let lhs = self.load(ram, self.cell);
        let rhs = match self.operand {
            Operand::Const(v) => v,
            Operand::Cell(addr) => self.load(ram, addr),
        };
        self.op.eval(lhs, rhs)
    }
}

/// Conjunction of atoms; empty means always true.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Condition {
    pub atoms: Vec<Atom>,
}

impl Condition {
    pub fn always() -> Self {
        Condition::default()
    }

    pub fn holds(&self, ram: &RamState) -> bool {
        self.atoms.iter().all(|a| a.holds(ram))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Effect {
    Set { cell: u8, value: u8 },
    Copy { dst: u8, src: u8 },
    Add { cell: u8, delta: i16 },
    Hold { cell: u8 },
}

impl Effect {
    fn apply(&self, ram: &mut RamState, prev: &RamState) {
        match *self {
            Effect::Set { cell, value } => ram.write(cell, value),
            Effect::Copy { dst, src } => ram.write(dst, ram.read(src)),
            Effect::Add { cell, delta } => {
                ram.write(cell, ram.read(cell).wrapping_add(delta.rem_euclid(256) as u8))
            }
            Effect::Hold { cell } => ram.write(cell, prev.read(cell)),
        }
    }

    /// Cells this effect writes.
    pub fn target(&self) -> u8 {
        match *self {
            Effect::Set { cell, .. } | Effect::Add { cell, .. } | Effect::Hold { cell } => cell,
            Effect::Copy { dst, .. } => dst,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchRule {
    pub trigger: Trigger,
    pub condition: Condition,
    pub effect: Effect,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchSpec {
    pub name: String,
    pub game_id: String,
    pub rules: Vec<PatchRule>,
}

impl PatchSpec {
    /// A patch with no rules.
    pub fn identity(name: &str, game_id: &str) -> Self {
        PatchSpec {
            name: name.to_string(),
            game_id: game_id.to_string(),
            rules: Vec::new(),
        }
    }

    /// Every cell some rule may write.
    pub fn written_cells(&self) -> Vec<u8> {
        let mut cells: Vec<u8> = self.rules.iter().map(|r| r.effect.target()).collect();
        cells.sort_unstable();
        cells.dedup();
        cells
    }

    pub fn to_json(&self) -> String {
        let doc = RawDoc {
            name: self.name.clone(),
            game: self.game_id.clone(),
            rules: self.rules.iter().map(RawRule::from).collect(),
        };
        serde_json::to_string(&doc).expect("patch documents always serialize")
    }
}

/// Applies every rule with a matching trigger whose condition holds, in
/// order. `prev` is the RAM at the end of the previous tick.
pub fn apply_rules(rules: &[PatchRule], trigger: Trigger, ram: &mut RamState, prev: &RamState) {
    for rule in rules {
        if rule.trigger == trigger && rule.condition.holds(ram) {
            rule.effect.apply(ram, prev);
        }
    }
}

// Wire format. Kept separate so the in-memory types stay validated.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    name: String,
    game: String,
    rules: Vec<RawRule>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    when: Trigger,
    #[serde(rename = "if", default, skip_serializing_if = "Vec::is_empty")]
    condition: Vec<RawAtom>,
    #[serde(rename = "do")]
    effect: RawEffect,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    cell: i64,
    op: Comparator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    other: Option<i64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    signed: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawEffect {
    Set { cell: i64, value: i64 },
    Copy { dst: i64, src: i64 },
    Add { cell: i64, delta: i64 },
    Hold { cell: i64 },
}

impl From<&PatchRule> for RawRule {
    fn from(rule: &PatchRule) -> Self {
        RawRule {
            when: rule.trigger,
            condition: rule
                .condition
                .atoms
                .iter()
                .map(|a| RawAtom {
                    cell: a.cell as i64,
                    op: a.op,
                    value: match a.operand {
                        Operand::Const(v) => Some(v as i64),
                        Operand::Cell(_) => None,
                    },
                    other: match a.operand {
                        Operand::Cell(c) => Some(c as i64),
                        Operand::Const(_) => None,
                    },
                    signed: a.signed,
                })
                .collect(),
            effect: match rule.effect {
                Effect::Set { cell, value } => RawEffect::Set {
                    cell: cell as i64,
                    value: value as i64,
                },
                Effect::Copy { dst, src } => RawEffect::Copy {
                    dst: dst as i64,
                    src: src as i64,
                },
                Effect::Add { cell, delta } => RawEffect::Add {
                    cell: cell as i64,
                    delta: delta as i64,
                },
                Effect::Hold { cell } => RawEffect::Hold { cell: cell as i64 },
            },
        }
    }
}

struct Validator {
    path: String,
}

impl Validator {
    fn fail(&self, field: &str, message: impl fmt::Display) -> PatchError {
        PatchError::Validation {
            path: format!("{}.{field}", self.path),
            message: message.to_string(),
        }
    }

    fn cell(&self, field: &str, v: i64) -> Result<u8, PatchError> {
        if (0..RAM_SIZE as i64).contains(&v) {
            Ok(v as u8)
        } else {
            Err(self.fail(field, format!("address {v} outside 0..=127")))
        }
    }

    fn ranged(&self, field: &str, v: i64, lo: i64, hi: i64) -> Result<i16, PatchError> {
        if (lo..=hi).contains(&v) {
            Ok(v as i16)
        } else {
            Err(self.fail(field, format!("{v} outside {lo}..={hi}")))
        }
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

fn validate(doc: RawDoc) -> Result<PatchSpec, PatchError> {
    let top = Validator { path: "$".into() };
    if !is_identifier(&doc.name) {
        return Err(top.fail("name", format!("'{}' is not a lowercase identifier", doc.name)));
    }
    if !is_identifier(&doc.game) {
        return Err(top.fail("game", format!("'{}' is not a lowercase identifier", doc.game)));
    }
    let mut rules = Vec::with_capacity(doc.rules.len());
    for (i, raw) in doc.rules.into_iter().enumerate() {
        let mut atoms = Vec::with_capacity(raw.condition.len());
        for (j, a) in raw.condition.into_iter().enumerate() {
            let v = Validator {
                path: format!("$.rules[{i}].if[{j}]"),
            };
            let cell = v.cell("cell", a.cell)?;
            let operand = match (a.value, a.other) {
                (Some(value), None) => {
                    let (lo, hi) = if a.signed { (-128, 127) } else { (0, 255) };
                    Operand::Const(v.ranged("value", value, lo, hi)?)
                }
                (None, Some(other)) => Operand::Cell(v.cell("other", other)?),
                _ => return Err(v.fail("value", "exactly one of 'value' or 'other' is required")),
            };
            atoms.push(Atom {
                cell,
                op: a.op,
                operand,
                signed: a.signed,
            });
        }
        let v = Validator {
            path: format!("$.rules[{i}].do"),
        };
        let effect = match raw.effect {
            RawEffect::Set { cell, value } => Effect::Set {
                cell: v.cell("cell", cell)?,
                value: v.ranged("value", value, 0, 255)? as u8,
            },
            RawEffect::Copy { dst, src } => Effect::Copy {
                dst: v.cell("dst", dst)?,
                src: v.cell("src", src)?,
            },
            RawEffect::Add { cell, delta } => Effect::Add {
                cell: v.cell("cell", cell)?,
                delta: v.ranged("delta", delta, -255, 255)?,
            },
            RawEffect::Hold { cell } => Effect::Hold {
                cell: v.cell("cell", cell)?,
            },
        };
        rules.push(PatchRule {
            trigger: raw.when,
            condition: Condition { atoms },
            effect,
        });
    }
    Ok(PatchSpec {
        name: doc.name,
        game_id: doc.game,
        rules,
    })
}

/// Parses and validates a patch document.
pub fn parse_patch(document: &str) -> Result<PatchSpec, PatchError> {
    let mut de = serde_json::Deserializer::from_str(document);
    let doc: RawDoc = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        PatchError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| PatchError::Parse {
        path: "$".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate(doc)
}

/// A machine with a patch attached. Rules fire on every logic tick.
#[derive(Clone, Debug)]
pub struct PatchedMachine {
    inner: Machine,
    spec: PatchSpec,
}

impl PatchedMachine {
    /// Attaches `spec` and re-runs reset so `on_reset` rules take effect.
    pub fn attach(machine: Machine, spec: PatchSpec, seed: u64) -> Result<Self, PatchError> {
        let machine_game = machine.game().id();
        if spec.game_id != machine_game {
            return Err(PatchError::GameMismatch {
                patch: spec.name.clone(),
                patch_game: spec.game_id.clone(),
                machine_game: machine_game.to_string(),
            });
        }
        let mut patched = PatchedMachine {
            inner: machine,
            spec,
        };
        patched.reset(seed);
        Ok(patched)
    }

    pub fn spec(&self) -> &PatchSpec {
        &self.spec
    }

    pub fn into_inner(self) -> Machine {
        self.inner
    }
}

/// Convenience form of [`PatchedMachine::attach`].
pub fn attach(machine: Machine, spec: PatchSpec, seed: u64) -> Result<PatchedMachine, PatchError> {
    PatchedMachine::attach(machine, spec, seed)
}

impl Env for PatchedMachine {
    fn game(&self) -> &'static dyn Game {
        self.inner.game()
    }

    fn variant(&self) -> &str {
        &self.spec.name
    }

    fn reset(&mut self, seed: u64) {
        self.inner.reset_with(seed, &self.spec.rules);
    }

    fn advance(&mut self, action: Action) -> Result<TickResult, MachineError> {
        self.inner.advance_with(action, &self.spec.rules)
    }

    fn ram(&self) -> RamState {
        self.inner.ram()
    }

    fn set_ram(&mut self, ram: RamState) {
        self.inner.set_ram(ram);
    }

    fn steps(&self) -> u32 {
        self.inner.steps()
    }

    fn is_terminated(&self) -> bool {
        self.inner.is_terminated()
    }

    fn snapshot(&self) -> Snapshot {
        self.inner.snapshot()
    }

    fn restore(&mut self, snapshot: &Snapshot) {
        self.inner.restore(snapshot);
    }

    fn render_into(&self, frame: &mut Frame) {
        self.inner.render_into(frame);
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const LAZY: &str = r#"{"name":"lazy_enemy","game":"paddleball","rules":[{"when":"post_step","if":[{"cell":4,"op":"gt","value":0,"signed":true}],"do":{"kind":"hold","cell":1}}]}"#;

    fn rule(trigger: Trigger, effect: Effect) -> PatchRule {
        PatchRule {
            trigger,
            condition: Condition::always(),
            effect,
        }
    }

    #[test]
    fn parses_lazy_enemy() {
        let spec = parse_patch(LAZY).unwrap();
        assert_eq!(spec.name, "lazy_enemy");
        assert_eq!(spec.game_id, "paddleball");
        assert_eq!(spec.rules.len(), 1);
        let r = &spec.rules[0];
        assert_eq!(r.trigger, Trigger::PostStep);
        assert_eq!(r.effect, Effect::Hold { cell: 1 });
        assert_eq!(
            r.condition.atoms,
            vec![Atom {
                cell: 4,
                op: Comparator::Gt,
                operand: Operand::Const(0),
                signed: true
            }]
        );
    }

    #[test]
    fn out_of_range_cell_is_a_validation_error() {
        let doc = r#"{"name":"x","game":"paddleball","rules":[{"when":"pre_step","do":{"kind":"set","cell":200,"value":1}}]}"#;
        match parse_patch(doc) {
            Err(PatchError::Validation { path, .. }) => assert_eq!(path, "$.rules[0].do.cell"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn empty_rules_is_valid() {
        let spec = parse_patch(r#"{"name":"noop","game":"bricks","rules":[]}"#).unwrap();
        assert!(spec.rules.is_empty());
    }

    #[test]
    fn malformed_documents_report_path() {
        let unknown_op = r#"{"name":"x","game":"g","rules":[{"when":"pre_step","if":[{"cell":1,"op":"approx","value":2}],"do":{"kind":"hold","cell":1}}]}"#;
        match parse_patch(unknown_op) {
            Err(PatchError::Parse { path, line, .. }) => {
                assert_eq!(path, "rules[0].if[0].op");
                assert_eq!(line, 1);
            }
            other => panic!("{other:?}"),
        }
        let unknown_kind = r#"{"name":"x","game":"g","rules":[{"when":"pre_step","do":{"kind":"xor","cell":1}}]}"#;
        assert!(matches!(parse_patch(unknown_kind), Err(PatchError::Parse { .. })));
        let extra_field = r#"{"name":"x","game":"g","rules":[{"when":"pre_step","do":{"kind":"hold","cell":1,"value":3}}]}"#;
        assert!(matches!(parse_patch(extra_field), Err(PatchError::Parse { .. })));
        let extra_top = r#"{"name":"x","game":"g","rules":[],"author":"me"}"#;
        assert!(matches!(parse_patch(extra_top), Err(PatchError::Parse { .. })));
        let multiline = "{\n  \"name\": \"x\",\n  \"game\": \"g\",\n  \"rules\": [{\"when\": \"sometimes\"}]\n}";
        match parse_patch(multiline) {
            Err(PatchError::Parse { line, path, .. }) => {
                assert_eq!(line, 4);
                assert_eq!(path, "rules[0].when");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn atom_needs_exactly_one_operand() {
        let both = r#"{"name":"x","game":"g","rules":[{"when":"pre_step","if":[{"cell":1,"op":"eq","value":2,"other":3}],"do":{"kind":"hold","cell":1}}]}"#;
        assert!(matches!(parse_patch(both), Err(PatchError::Validation { .. })));
        let signed_overflow = r#"{"name":"x","game":"g","rules":[{"when":"pre_step","if":[{"cell":1,"op":"eq","value":200,"signed":true}],"do":{"kind":"hold","cell":1}}]}"#;
        assert!(matches!(parse_patch(signed_overflow), Err(PatchError::Validation { .. })));
    }

    #[test]
    fn rules_apply_in_order() {
        let rules = [
            rule(Trigger::PreStep, Effect::Set { cell: 4, value: 10 }),
            rule(Trigger::PreStep, Effect::Copy { dst: 5, src: 4 }),
        ];
        let mut ram = RamState::from_bytes([3; 128]);
        let prev = ram;
        apply_rules(&rules, Trigger::PreStep, &mut ram, &prev);
        assert_eq!(ram.read(4), 10);
        assert_eq!(ram.read(5), 10);
        assert_eq!(ram.diff(&prev), vec![4, 5]);
    }

    #[test]
    fn triggers_filter_rules() {
        let rules = [rule(Trigger::OnReset, Effect::Set { cell: 0, value: 9 })];
        let mut ram = RamState::zeroed();
        let prev = ram;
        apply_rules(&rules, Trigger::PostStep, &mut ram, &prev);
        assert_eq!(ram.read(0), 0);
        apply_rules(&rules, Trigger::OnReset, &mut ram, &prev);
        assert_eq!(ram.read(0), 9);
    }

    #[test]
    fn hold_at_tick_zero_is_a_no_op() {
        let rules = [rule(Trigger::PostStep, Effect::Hold { cell: 7 })];
        let mut ram = RamState::from_bytes([42; 128]);
        let prev = ram;
        apply_rules(&rules, Trigger::PostStep, &mut ram, &prev);
        assert_eq!(ram, prev);
    }

    #[test]
    fn signed_comparison() {
        let rules = [PatchRule {
            trigger: Trigger::PreStep,
            condition: Condition {
                atoms: vec![Atom {
                    cell: 4,
                    op: Comparator::Gt,
                    operand: Operand::Const(0),
                    signed: true,
                }],
            },
            effect: Effect::Set { cell: 9, value: 1 },
        }];
        let mut ram = RamState::zeroed();
        ram.write(4, 200);
        let prev = ram;
        apply_rules(&rules, Trigger::PreStep, &mut ram, &prev);
        assert_eq!(ram.read(9), 0, "200 is -56 as two's complement");
        ram.write(4, 100);
        apply_rules(&rules, Trigger::PreStep, &mut ram, &prev);
        assert_eq!(ram.read(9), 1);
    }

    #[test]
    fn cell_operands_and_wrapping_add() {
        let rules = [PatchRule {
            trigger: Trigger::PreStep,
            condition: Condition {
                atoms: vec![Atom {
                    cell: 0,
                    op: Comparator::Lt,
                    operand: Operand::Cell(1),
                    signed: false,
                }],
            },
            effect: Effect::Add { cell: 2, delta: -3 },
        }];
        let mut ram = RamState::zeroed();
        ram.write(0, 5);
        ram.write(1, 6);
        ram.write(2, 1);
        let prev = ram;
        apply_rules(&rules, Trigger::PreStep, &mut ram, &prev);
        assert_eq!(ram.read(2), 254);
    }

    #[test]
    fn attach_checks_game() {
        let m = Machine::create(&crate::MachineConfig::new("crossing", 0)).unwrap();
        let spec = parse_patch(LAZY).unwrap();
        assert!(matches!(attach(m, spec, 0), Err(PatchError::GameMismatch { .. })));
    }

    fn arb_atom() -> impl Strategy<Value = Atom> {
        (0u8..128, 0usize..6, any::<bool>(), any::<bool>(), any::<u8>()).prop_map(
            |(cell, op, signed, use_cell, v)| {
                let op = [
                    Comparator::Eq,
                    Comparator::Ne,
                    Comparator::Lt,
                    Comparator::Le,
                    Comparator::Gt,
                    Comparator::Ge,
                ][op];
                let operand = if use_cell {
                    Operand::Cell(v & 0x7f)
                } else if signed {
                    Operand::Const(v as i8 as i16)
                } else {
                    Operand::Const(v as i16)
                };
                Atom {
                    cell,
                    op,
                    operand,
                    signed,
                }
            },
        )
    }

    fn arb_effect() -> impl Strategy<Value = Effect> {
        prop_oneof![
            (0u8..128, any::<u8>()).prop_map(|(cell, value)| Effect::Set { cell, value }),
            (0u8..128, 0u8..128).prop_map(|(dst, src)| Effect::Copy { dst, src }),
            (0u8..128, -255i16..=255).prop_map(|(cell, delta)| Effect::Add { cell, delta }),
            (0u8..128).prop_map(|cell| Effect::Hold { cell }),
        ]
    }

    fn arb_rule() -> impl Strategy<Value = PatchRule> {
        (
            prop_oneof![Just(Trigger::OnReset), Just(Trigger::PreStep), Just(Trigger::PostStep)],
            proptest::collection::vec(arb_atom(), 0..3),
            arb_effect(),
        )
            .prop_map(|(trigger, atoms, effect)| PatchRule {
                trigger,
                condition: Condition { atoms },
                effect,
            })
    }

    proptest! {
        #[test]
        fn documents_round_trip(rules in proptest::collection::vec(arb_rule(), 0..6)) {
            let spec = PatchSpec { name: "p".into(), game_id: "crossing".into(), rules };
            prop_assert_eq!(parse_patch(&spec.to_json()).unwrap(), spec);
        }

        #[test]
        fn conditions_never_write(atoms in proptest::collection::vec(arb_atom(), 0..4), bytes in proptest::collection::vec(any::<u8>(), 128)) {
            let ram = RamState::from_slice(&bytes).unwrap();
            let copy = ram;
            let _ = Condition { atoms }.holds(&ram);
            prop_assert_eq!(ram, copy);
        }
    }
}
