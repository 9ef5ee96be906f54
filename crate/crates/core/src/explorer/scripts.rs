//! Bundled scripts, each pairing a protection with the malfunction it
//! prevents.

/// Two writers racing a conditional append on one list.
pub const MICRO: &str = "\
list seat window 4
actor w1: cond_append seat state!=reserved state=reserved by=w1
actor w2: cond_append seat state!=reserved state=reserved by=w2
";

/// Two racers for one seat, each claiming, reading, checking and appending.
pub const SEATS: &str = "\
list seat window 4
entry seat state=free by=none
actor r1: claim seat
actor r1: read seat
actor r1: guard state!=reserved
actor r1: append seat state=reserved by=r1
actor r1: release seat
actor r2: claim seat
actor r2: read seat
actor r2: guard state!=reserved
actor r2: append seat state=reserved by=r2
actor r2: release seat
";

/// Two workers deriving from four source entries.
pub const DERIVATION: &str = "\
list source window 4
list derived window 4
derivation D source derived
entry source v=1
entry source v=2
entry source v=3
entry source v=4
actor w1: derive D
actor w1: derive D
actor w2: derive D
actor w2: derive D
";

/// Two transfers whose second lists overlap in opposite orders.
pub const TRANSFER: &str = "\
list F1
list F2
list L1 window 4
list L2 window 4
universe F1 L1 L2
universe F2 L1 L2
entry F1 msg=m1
entry F2 msg=m2
actor t1: transfer F1 L1 L2 msg=m1
actor t2: transfer F2 L2 L1 msg=m2
";

macro_rules! elevator {
    ($reader:literal) => {
        concat!(
            "\
list elevator window 2
list floor window 2
group consistent elevator floor equal phase
entry elevator status=idle phase=0
entry floor status=present phase=0
commit consistent
actor e: append elevator status=boarded phase=1
actor e: commit consistent
actor e: append elevator status=moving phase=2
actor f: append floor status=departed phase=1
actor f: commit consistent
actor f: append floor status=empty phase=2
",
            $reader
        )
    };
}

/// Elevator and floor updates read one list at a time.
pub const ELEVATOR_DIRECT: &str = elevator!("actor r: read_direct consistent\n");

/// Elevator and floor updates read through the consistency group.
pub const ELEVATOR_GROUP: &str = elevator!("actor r: read_group consistent\n");

/// Three cursors walking four entries.
pub const PIPELINE: &str = "\
list P
cursor c1 P
cursor c2 P
cursor c3 P
entry P v=1
entry P v=2
entry P v=3
entry P v=4
actor p1: take c1
actor p1: take c1
actor p1: take c1
actor p1: take c1
actor p2: take c2
actor p2: take c2
actor p2: take c2
actor p2: take c2
actor p3: take c3
actor p3: take c3
actor p3: take c3
actor p3: take c3
";

pub const ALL: &[(&str, &str)] = &[
    ("micro", MICRO),
    ("seats", SEATS),
    ("derivation", DERIVATION),
    ("transfer", TRANSFER),
    ("elevator_direct", ELEVATOR_DIRECT),
    ("elevator_group", ELEVATOR_GROUP),
    ("pipeline", PIPELINE),
];
