//! Scripted scenarios: the forest/cavern walkthrough world and fifteen
//! command/action pairs with worlds in which each action list fully executes.

use super::builder::WorldBuilder;
use super::catalog::Catalog;
use super::world::WorldGraph;

/// Forest with a live troll and three items, a cavern with an orc, a chest,
/// weapons and three apples, and an empty tower beyond it.
pub fn walkthrough_world() -> WorldGraph {
    WorldBuilder::new(&Catalog::default())
        .path("forest", "cavern")
        .path("cavern", "tower")
        .place("dragon", "forest")
        .place("troll", "forest")
        .place("rusty sword", "forest")
        .place("glass of beer", "forest")
        .place("mace", "forest")
        .place("orc", "cavern")
        .place("axe", "cavern")
        .place("treasure chest", "cavern")
        .place("crossbow", "cavern")
        .place("apple", "cavern")
        .place("apple", "cavern")
        .place("apple", "cavern")
        .build()
        .expect("walkthrough world is valid")
}

/// Commands typed during the walkthrough, in order.
pub const WALKTHROUGH: [&str; 9] = [
    "look",
    "hit troll",
    "go cavern",
    "get apple",
    "eat apple",
    "inventory",
    "get crossbow",
    "put crossbow in treasure chest",
    "look",
];

#[derive(Debug, Clone)]
pub struct ScriptedExample {
    pub command: &'static str,
    pub actions: &'static str,
    pub world: WorldGraph,
}

fn base() -> WorldBuilder {
    WorldBuilder::new(&Catalog::default()).path("forest", "cavern").path("cavern", "tower")
}

/// Fifteen natural-language commands with their action lists (written
/// without separators, as annotators typed them) and a world each list
/// replays in.
pub fn scripted_examples() -> Vec<ScriptedExample> {
    let row = |command, actions, world: WorldBuilder| ScriptedExample {
        command,
        actions,
        world: world.build().expect("scripted world is valid"),
    };
    vec![
        row(
            "steal the crown from the troll and put it on",
            "take silver crown from troll wear silver crown",
            base().place("dragon", "forest").place("troll", "forest").place("silver crown", "troll"),
        ),
        row(
            "pick up the leather pouch and put the armor in it",
            "get leather pouch put armor in leather pouch",
            base().place("dragon", "tower").place("leather pouch", "tower").place("armor", "dragon"),
        ),
        row(
            "walk to the forest and hand the blue ring to the troll",
            "go forest give blue ring to troll",
            base().place("dragon", "cavern").place("troll", "forest").place("blue ring", "dragon"),
        ),
        row(
            "drink some beer, and then walk through the forest to the tower",
            "drink beer go forest go tower",
            WorldBuilder::new(&Catalog::default())
                .path("cavern", "forest")
                .path("forest", "tower")
                .place("dragon", "cavern")
                .place("glass of beer", "dragon"),
        ),
        row(
            "pick up the armor and put it on",
            "get armor wear armor",
            base().place("dragon", "forest").place("armor", "forest"),
        ),
        row(
            "wear the gold ring and put the beer inside the treasure chest before you go to the cavern",
            "get gold ring wear gold ring put beer in treasure chest go cavern",
            base()
                .place("dragon", "forest")
                .place("gold ring", "forest")
                .place("glass of beer", "dragon")
                .place("treasure chest", "forest"),
        ),
        row(
            "equip the rusty sword. go to the cavern and kill the orc with the rusty sword",
            "get rusty sword wield rusty sword go cavern hit orc",
            base().place("dragon", "forest").place("rusty sword", "forest").place("orc", "cavern"),
        ),
        row(
            "eat one of the apple and give the other apple to the orc",
            "get apple get apple give apple to orc eat apple",
            base().place("dragon", "cavern").place("apple", "cavern").place("apple", "cavern").place("orc", "cavern"),
        ),
        row(
            "kill the troll with the axe before putting axe in treasure chest",
            "get axe hit troll put axe in treasure chest",
            base()
                .place("dragon", "forest")
                .place("axe", "forest")
                .place("troll", "forest")
                .place("treasure chest", "forest"),
        ),
        row(
            "take the blue and gold ring and head to the forest to give the troll the gold ring",
            "get gold ring get blue ring go forest give gold ring to troll",
            base()
                .place("dragon", "cavern")
                .place("gold ring", "cavern")
                .place("blue ring", "cavern")
                .place("troll", "forest"),
        ),
        row(
            "fly into the cavern. find an apple and eat it and then strip the gold ring from the orc",
            "go cavern get apple eat apple take gold ring from orc",
            base().place("dragon", "forest").place("apple", "cavern").place("orc", "cavern").place("gold ring", "orc"),
        ),
        row(
            "feed the troll with your bread and beer. fly up to the tower and find your axe within the magical treasure chest.",
            "give bread to troll give beer to troll go tower get axe from treasure chest",
            WorldBuilder::new(&Catalog::default())
                .path("forest", "tower")
                .path("forest", "cavern")
                .place("dragon", "forest")
                .place("troll", "forest")
                .place("bread", "dragon")
                .place("glass of beer", "dragon")
                .place("treasure chest", "tower")
                .place("axe", "treasure chest"),
        ),
        row(
            "dress yourself with the gold ring and acquire the silver crown. place it upon your head and then ready your rusty sword for battle.",
            "wear gold ring get silver crown wear silver crown wield rusty sword",
            base()
                .place("dragon", "tower")
                .place("gold ring", "dragon")
                .place("rusty sword", "dragon")
                .place("silver crown", "tower"),
        ),
        row(
            "disarm the troll then hit it.",
            "take rusty sword from troll hit troll",
            base().place("dragon", "forest").place("troll", "forest").place("rusty sword", "troll").wielded("rusty sword"),
        ),
        row(
            "grab the crossbow and race to the cavern. steal the beer from the troll and chug it",
            "get crossbow go cavern take beer from troll drink beer",
            base()
                .place("dragon", "forest")
                .place("crossbow", "forest")
                .place("troll", "cavern")
                .place("glass of beer", "troll"),
        ),
    ]
}
