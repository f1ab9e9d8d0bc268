// SPDX-License-Identifier: MIT OR Apache-2.0

//! Prompt rendering.
//!
//! Two scaffolds are supported. The standard one describes the domain in
//! plain English and only substitutes the naming's action words into the
//! action list and plan lines. The mystery one describes every rule in terms
//! of the naming's surface words.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Concept, Naming};
use crate::blocksworld::{prompt_example_plan, Action, Plan, Predicate, Puzzle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    #[default]
    Standard,
    Mystery,
}

/// Which naming word fills the "held" and the "on top of" slots of the
/// mystery scaffold.
///
/// `Table` uses each concept's own word. `Swapped` exchanges the two, which
/// is the arrangement the published Mystery 1 prompt uses (its relational
/// atom reads "craves", the word listed for `holding`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RelationalSlots {
    #[default]
    Table,
    Swapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Template {
    pub kind: TemplateKind,
    #[serde(default)]
    pub relational: RelationalSlots,
}

impl Template {
    pub const STANDARD: Template = Template {
        kind: TemplateKind::Standard,
        relational: RelationalSlots::Table,
    };
    pub const MYSTERY: Template = Template {
        kind: TemplateKind::Mystery,
        relational: RelationalSlots::Table,
    };

    pub fn with_relational(self, relational: RelationalSlots) -> Self {
        Self { relational, ..self }
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

struct Words<'a> {
    naming: &'a Naming,
    relational: RelationalSlots,
}

impl Words<'_> {
    fn action(&self, c: Concept) -> &str {
        self.naming.word(c)
    }

    fn predicate(&self, c: Concept) -> &str {
        let slot = match (self.relational, c) {
            (RelationalSlots::Swapped, Concept::Holding) => Concept::On,
            (RelationalSlots::Swapped, Concept::On) => Concept::Holding,
            _ => c,
        };
        self.naming.word(slot)
    }
}

fn standard_header(w: &Words<'_>) -> String {
    let mut s = String::from(
        "I am playing with a set of blocks where I need to arrange the blocks into stacks. Here are the actions I can do\n\n",
    );
    let _ = writeln!(s, "{} a block", capitalize(w.action(Concept::PickUp)));
    let _ = writeln!(
        s,
        "{} a block from on top of another block",
        capitalize(w.action(Concept::Unstack))
    );
    let _ = writeln!(s, "{} a block", capitalize(w.action(Concept::PutDown)));
    let _ = writeln!(
        s,
        "{} a block on top of another block",
        capitalize(w.action(Concept::Stack))
    );
    s.push_str(
        "\nI have the following restrictions on my actions:
I can only pick up or unstack one block at a time.
I can only pick up or unstack a block if my hand is empty.
I can only pick up a block if the block is on the table and the block is clear.
A block is clear if the block has no other blocks on top of it and if the block is not picked up.
I can only unstack a block from on top of another block if the block I am unstacking was really on top of the other block.
I can only unstack a block from on top of another block if the block I am unstacking is clear.
Once I pick up or unstack a block, I am holding the block.
I can only put down a block that I am holding.
I can only stack a block on top of another block if I am holding the block being stacked.
I can only stack a block on top of another block if the block onto which I am stacking the block is clear.
Once I put down or stack a block, my hand becomes empty.
Once you stack a block on top of a second block, the second block is no longer clear.
",
    );
    s
}

fn mystery_header(w: &Words<'_>) -> String {
    let pick = capitalize(w.action(Concept::PickUp));
    let unstack = capitalize(w.action(Concept::Unstack));
    let put = capitalize(w.action(Concept::PutDown));
    let stack = capitalize(w.action(Concept::Stack));
    let clear = capitalize(w.predicate(Concept::Clear));
    let table = capitalize(w.predicate(Concept::OnTable));
    let empty = capitalize(w.predicate(Concept::HandEmpty));
    let held = capitalize(w.predicate(Concept::Holding));
    let on = capitalize(w.predicate(Concept::On));
    format!(
        "I am playing with a set of objects. Here are the actions I can do:
   {pick} object
   {unstack} object from another object
   {put} object
   {stack} object from another object

I have the following restrictions on my actions:
    To perform {pick} action, the following facts need to be true: {clear} object, {table} object, {empty}.
    Once {pick} action is performed the following facts will be true: {held} object.
    Once {pick} action is performed the following facts will be false: {clear} object, {table} object, {empty}.
    To perform {put} action, the following facts need to be true: {held} object.
    Once {put} action is performed the following facts will be true: {clear} object, {table} object, {empty}.
    Once {put} action is performed the following facts will be false: {held} object.
    To perform {stack} action, the following needs to be true: {clear} other object, {held} object.
    Once {stack} action is performed the following will be true: {empty}, {clear} object, Object {on} other object.
    Once {stack} action is performed the following will be false: {clear} other object, {held} object.
    To perform {unstack} action, the following needs to be true: Object {on} other object, {clear} object, {empty}.
    Once {unstack} action is performed the following will be true: {held} object, {clear} other object.
    Once {unstack} action is performed the following will be false:, Object {on} other object, {clear} object, {empty}.
"
    )
}

fn phrase(kind: TemplateKind, w: &Words<'_>, p: Predicate) -> String {
    match (kind, p) {
        (TemplateKind::Standard, Predicate::Clear(x)) => format!("Block {x} is clear"),
        (TemplateKind::Standard, Predicate::HandEmpty) => "the hand is empty".to_owned(),
        (TemplateKind::Standard, Predicate::Holding(x)) => format!("I am holding Block {x}"),
        (TemplateKind::Standard, Predicate::On(a)) => {
            format!("Block {} is on top of Block {}", a.top(), a.below())
        }
        (TemplateKind::Standard, Predicate::OnTable(x)) => format!("Block {x} is on the table"),
        (TemplateKind::Mystery, Predicate::Clear(x)) => format!("{} Block {x}", w.predicate(Concept::Clear)),
        (TemplateKind::Mystery, Predicate::HandEmpty) => w.predicate(Concept::HandEmpty).to_owned(),
        (TemplateKind::Mystery, Predicate::Holding(x)) => format!("{} Block {x}", w.predicate(Concept::Holding)),
        (TemplateKind::Mystery, Predicate::On(a)) => {
            format!("Block {} {} Block {}", a.top(), w.predicate(Concept::On), a.below())
        }
        (TemplateKind::Mystery, Predicate::OnTable(x)) => format!("{} Block {x}", w.predicate(Concept::OnTable)),
    }
}

fn statement(kind: TemplateKind, w: &Words<'_>, puzzle: &Puzzle) -> String {
    let facts: Vec<String> = puzzle.initial().predicates().map(|p| phrase(kind, w, p)).collect();
    let goals: Vec<String> = puzzle
        .goal()
        .atoms()
        .iter()
        .map(|&a| phrase(kind, w, Predicate::On(a)))
        .collect();
    let end = match kind {
        TemplateKind::Standard => "",
        TemplateKind::Mystery => ".",
    };
    format!(
        "[STATEMENT]\nAs initial conditions I have that, {}.\nMy goal is to have that {}{end}\n",
        facts.join(", "),
        goals.join(" and ")
    )
}

/// One plan line in the template's surface form, e.g. `feast Block C from Block A`.
pub fn render_plan_line(action: Action, naming: &Naming, kind: TemplateKind) -> String {
    let (verb, x, y) = match action {
        Action::PickUp(x) => (naming.word(Concept::PickUp), x, None),
        Action::PutDown(x) => (naming.word(Concept::PutDown), x, None),
        Action::Stack(x, y) => (naming.word(Concept::Stack), x, Some((y, "on top of"))),
        Action::Unstack(x, y) => (naming.word(Concept::Unstack), x, Some((y, "from on top of"))),
    };
    match (y, kind) {
        (None, _) => format!("{verb} Block {x}"),
        (Some((y, link)), TemplateKind::Standard) => format!("{verb} Block {x} {link} Block {y}"),
        (Some((y, _)), TemplateKind::Mystery) => format!("{verb} Block {x} from Block {y}"),
    }
}

fn plan_block(kind: TemplateKind, naming: &Naming, plan: &Plan) -> String {
    let mut s = String::from("[PLAN]\n");
    for &a in plan.actions() {
        s.push_str(&render_plan_line(a, naming, kind));
        s.push('\n');
    }
    s.push_str("[PLAN END]\n");
    s
}

fn header(template: Template, w: &Words<'_>) -> String {
    match template.kind {
        TemplateKind::Standard => standard_header(w),
        TemplateKind::Mystery => mystery_header(w),
    }
}

fn example_section(template: Template, w: &Words<'_>, puzzle: &Puzzle, plan: &Plan) -> String {
    let (gap, plan_intro) = match template.kind {
        TemplateKind::Standard => ("\n", "\nMy plan is as follows:\n\n"),
        TemplateKind::Mystery => ("", "My plan is as follows:\n"),
    };
    format!(
        "\nHere is an example problem:\n{gap}{}{plan_intro}{}",
        statement(template.kind, w, puzzle),
        plan_block(template.kind, w.naming, plan)
    )
}

/// Rules plus one worked example (`puzzle` solved by `plan`).
pub fn render_example(puzzle: &Puzzle, plan: &Plan, naming: &Naming, template: Template) -> String {
    let w = Words {
        naming,
        relational: template.relational,
    };
    let mut s = header(template, &w);
    s.push_str(&example_section(template, &w, puzzle, plan));
    s
}

/// Full prompt for `puzzle`: rules, the built-in worked example, then the
/// target statement, ending at the plan request.
pub fn render_prompt(puzzle: &Puzzle, naming: &Naming, template: Template) -> String {
    let w = Words {
        naming,
        relational: template.relational,
    };
    let mut s = render_example(&Puzzle::prompt_example(), &prompt_example_plan(), naming, template);
    let (gap, plan_intro) = match template.kind {
        TemplateKind::Standard => ("\n", "\nMy plan is as follows:\n"),
        TemplateKind::Mystery => ("", "My plan is as follows:\n"),
    };
    let _ = write!(
        s,
        "\nHere is the problem to solve:\n{gap}{}{plan_intro}",
        statement(template.kind, &w, puzzle)
    );
    s
}
