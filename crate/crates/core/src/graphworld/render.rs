//! Text rendering of world states and action outcomes.

use std::collections::BTreeMap;

use super::action::{ActionType, GroundedAction};
use super::world::{EntityKind, NodeId, Property, WorldGraph};

const NUMBERS: [&str; 11] = ["no", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];

fn article(name: &str) -> &'static str {
    match name.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn plural(name: &str) -> String {
    if name.ends_with('s') || name.ends_with("sh") || name.ends_with("ch") {
        format!("{name}es")
    } else {
        format!("{name}s")
    }
}

/// "an axe", "three apples".
fn counted(name: &str, count: usize) -> String {
    if count == 1 {
        format!("{} {name}", article(name))
    } else {
        let n = NUMBERS.get(count).map_or_else(|| count.to_string(), |s| s.to_string());
        format!("{n} {}", plural(name))
    }
}

fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

/// Groups ids by name (sorted) and renders each group with its count.
fn describe_group(world: &WorldGraph, ids: &[NodeId], annotate: impl Fn(NodeId) -> String) -> Vec<String> {
    let mut groups: BTreeMap<(String, String), usize> = BTreeMap::new();
    for &id in ids {
        *groups.entry((world.name(id).to_string(), annotate(id))).or_default() += 1;
    }
    groups
        .into_iter()
        .map(|((name, note), n)| format!("{}{note}", counted(&name, n)))
        .collect()
}

/// `look`-style description of the actor's surroundings.
pub fn render(world: &WorldGraph) -> String {
    let actor = world.actor();
    let here = world.actor_location();
    let mut lines = vec![format!("You are in the {}.", world.name(here))];

    let present: Vec<NodeId> = world.contents(here).into_iter().filter(|&id| id != actor).collect();
    let mut agents: Vec<NodeId> = present.iter().copied().filter(|&id| world.kind(id) == EntityKind::Agent).collect();
    agents.sort_by(|a, b| world.name(*a).cmp(world.name(*b)));
    for g in &agents {
        let name = world.name(*g);
        if world.has_property(*g, Property::Dead) {
            lines.push(format!("A dead {name} is here."));
        } else {
            let a = article(name);
            let mut a = a.to_string();
            a[..1].make_ascii_uppercase();
            lines.push(format!("{a} {name} is here."));
        }
    }

    let items: Vec<NodeId> = present.iter().copied().filter(|&id| world.kind(id) == EntityKind::Object).collect();
    if items.is_empty() {
        if agents.is_empty() {
            lines.push("There is nothing here.".to_string());
        }
    } else {
        let listed = describe_group(world, &items, |_| String::new());
        lines.push(format!("There is {} here.", join_list(&listed)));
    }

    let mut paths: Vec<&str> = world.neighbors(here).into_iter().map(|l| world.name(l)).collect();
    paths.sort();
    let paths: Vec<String> = paths.into_iter().map(|p| format!("the {p}")).collect();
    lines.push(match paths.len() {
        0 => "There are no paths here.".to_string(),
        1 => format!("There is a path to {}.", paths[0]),
        _ => format!("There are paths to {}.", join_list(&paths)),
    });
    lines.join("\n")
}

pub fn render_inventory(world: &WorldGraph) -> String {
    let held = world.contents(world.actor());
    if held.is_empty() {
        return "You are carrying nothing.".to_string();
    }
    let listed = describe_group(world, &held, |id| {
        if world.is_worn(id) {
            " (worn)".to_string()
        } else if world.is_wielded(id) {
            " (wielded)".to_string()
        } else {
            String::new()
        }
    });
    format!("You are carrying {}.", join_list(&listed))
}

fn render_examine(world: &WorldGraph, id: NodeId) -> String {
    let name = world.name(id);
    let mut out = format!("You see {} {name}.", article(name));
    match world.kind(id) {
        EntityKind::Agent => {
            if world.has_property(id, Property::Dead) {
                out.push_str(&format!(" The {name} is dead."));
            }
            let held = world.contents(id);
            if held.is_empty() {
                out.push_str(&format!(" The {name} is carrying nothing."));
            } else {
                let listed = describe_group(world, &held, |_| String::new());
                out.push_str(&format!(" The {name} is carrying {}.", join_list(&listed)));
            }
        }
        EntityKind::Object if world.has_property(id, Property::Container) => {
            let inside = world.contents(id);
            if inside.is_empty() {
                out.push_str(&format!(" The {name} is empty."));
            } else {
                let listed = describe_group(world, &inside, |_| String::new());
                out.push_str(&format!(" The {name} contains {}.", join_list(&listed)));
            }
        }
        _ => {}
    }
    out
}

/// The game's reply to a successful action. `before` is the state the action
/// was applied to, `after` the result.
pub fn describe_outcome(before: &WorldGraph, action: &GroundedAction, after: &WorldGraph) -> String {
    let a1 = action.arg1().unwrap_or_default();
    let a2 = action.arg2().unwrap_or_default();
    match action.action_type {
        ActionType::Look | ActionType::Go | ActionType::Follow => render(after),
        ActionType::Examine => {
            let id = before
                .nodes_named(a1)
                .find(|&id| super::engine::is_visible(before, id))
                .or_else(|| before.nodes_named(a1).next());
            id.map_or_else(|| format!("You see no {a1}."), |id| render_examine(before, id))
        }
        ActionType::Get => "Done.".to_string(),
        ActionType::Drop => format!("You drop the {a1}."),
        ActionType::Eat => "Yum.".to_string(),
        ActionType::Drink => "Gulp.".to_string(),
        ActionType::Wear => format!("You are now wearing the {a1}."),
        ActionType::Remove => format!("You take off the {a1}."),
        ActionType::Wield => format!("You are now wielding the {a1}."),
        ActionType::Unwield => format!("You put away the {a1}."),
        ActionType::Hit => format!("You hit the {a1}! The {a1} is dead!!!!"),
        ActionType::PutIn => format!("You put {} {a1} in the {a2}.", article(a1)),
        ActionType::GetFrom => format!("You take {} {a1} from the {a2}.", article(a1)),
        ActionType::GiveTo => format!("You give {} {a1} to the {a2}.", article(a1)),
        ActionType::TakeFrom => format!("You take {} {a1} from the {a2}.", article(a1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counted_phrases() {
        assert_eq!(counted("axe", 1), "an axe");
        assert_eq!(counted("apple", 3), "three apples");
        assert_eq!(counted("glass of beer", 1), "a glass of beer");
        assert_eq!(join_list(&["a".into(), "b".into(), "c".into()]), "a, b, and c");
    }
}
