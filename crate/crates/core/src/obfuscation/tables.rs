// SPDX-License-Identifier: MIT OR Apache-2.0

// Mystery BlocksWorld surface words, one row per naming.

/// pick up, put down, stack, unstack
pub(super) const ACTION_WORDS: [[&str; 4]; 20] = [
    ["attack", "succumb", "overcome", "feast"],
    ["illuminate", "silence", "distill", "divest"],
    ["tltezi", "jchntg", "deesdu", "xavirm"],
    ["swim", "fire", "deduct", "respond"],
    ["whisper", "calculate", "orbit", "navigate"],
    ["decode", "hibernate", "thunder", "quench"],
    ["explore", "ripen", "weave", "bloom"],
    ["harvest", "ignite", "carve", "suspend"],
    ["construct", "demolish", "reinforce", "collapse"],
    ["plant", "harvest", "nurture", "prune"],
    ["prosecute", "acquit", "testify", "appeal"],
    ["broadcast", "receive", "encrypt", "decode"],
    ["whisper", "banish", "entangle", "unmask"],
    ["question", "resolve", "interweave", "liberate"],
    ["summon", "dismiss", "fold", "unravel"],
    ["open", "close", "connect", "disconnect"],
    ["chop", "serve", "season", "taste"],
    ["release", "grasp", "separate", "combine"],
    ["transcend", "sublimate", "actualize", "deconstruct"],
    ["flixate", "grample", "chonder", "sprill"],
];

/// ontable, clear, handempty, holding, on
pub(super) const PREDICATE_WORDS: [[&str; 5]; 20] = [
    ["planet", "province", "harmony", "craves", "pain"],
    ["aura", "essence", "nexus", "harmonizes", "pulse"],
    ["oxtslo", "adohre", "jqlyol", "gszswg", "ivbmyg"],
    ["fever", "marble", "craving", "mines", "shadow"],
    ["crystal", "fountain", "autumn", "illuminates", "legend"],
    ["prism", "hollow", "zenith", "echoes", "emblem"],
    ["fossil", "dialect", "equinox", "fractures", "symphony"],
    ["nebula", "labyrinth", "mirage", "captivates", "cascade"],
    ["eclipse", "vintage", "paradox", "resonates", "twilight"],
    ["crystal", "puzzle", "vortex", "whispers", "cipher"],
    ["nebula", "molecule", "anthem", "silhouettes", "voltage"],
    ["horizon", "compass", "solstice", "orbits", "quantum"],
    ["tethered", "unburdened", "hollow", "shrouds", "consuming"],
    ["echoing", "sovereign", "potential", "obscures", "contemplating"],
    ["suspended", "timeless", "interval", "transcends", "enveloping"],
    ["paired", "single", "balanced", "matches", "mirrors"],
    ["plated", "fresh", "kitchen", "simmering", "marinated"],
    ["floating", "occupied", "crowded", "repels", "avoids"],
    [
        "phenomenal",
        "unmediated",
        "dialectical",
        "instantiates",
        "necessitates",
    ],
    ["morkled", "thristy", "plimmish", "vexates", "quorbles"],
];
