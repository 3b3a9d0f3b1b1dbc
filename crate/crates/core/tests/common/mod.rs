//! Tabulated circuit errors on the ladder `0.05 · 2^-k`, integrated to
//! `t = 0.2`.

#![allow(dead_code)]

pub mod invariants;

pub const CIRCUIT_T_END: f64 = 0.2;

/// `‖x(T) - X(T)‖₂` for `r = 1..5`, `k = 0..6`.
pub const CG_STATE: [[f64; 7]; 5] = [
    [
        7.46764151256704e-3, 1.04014780757267e-3, 2.38883402168628e-4, 5.85830808079364e-5,
        1.45771034981934e-5, 3.64002095932221e-6, 9.09739870732153e-7,
    ],
    [
        1.10226298571773e-3, 2.82018683414164e-5, 1.516864199175e-6, 9.15457001652455e-8,
        5.67261593367985e-9, 3.53793683244905e-10, 2.21010139715475e-11,
    ],
    [
        4.63995925865373e-4, 1.27412683597476e-5, 6.96014942753954e-7, 4.21637934589882e-8,
        2.6151069823861e-9, 1.6313543262367e-10, 1.01884869736449e-11,
    ],
    [
        4.34110948173315e-5, 2.62191444285734e-7, 3.47627333524517e-9, 5.22674751464339e-11,
        8.07655560746934e-13, 1.1226161079589e-14, 4.47476350724876e-15,
    ],
    [
        2.53269893358441e-5, 1.55346469595784e-7, 2.06791362783479e-9, 3.11216269221367e-11,
        4.84609037372747e-13, 9.49905937503684e-15, 1.0833637964918e-14,
    ],
];

/// Indicator-pairing multiplier error on the last interval, `r = 1..5`.
pub const CG_MULT: [[f64; 7]; 5] = [
    [
        6.37276930892237e-2, 1.37572921719253e-3, 9.82439701667337e-4, 1.87280391966055e-4,
        2.65896735690135e-5, 3.48810987151754e-6, 4.45119239470687e-7,
    ],
    [
        9.82233403180355e-3, 4.09100647076333e-5, 6.47409217613415e-6, 3.05024779989616e-7,
        1.07985551750511e-8, 3.53994153434734e-10, 1.12934279983268e-11,
    ],
    [
        3.95853226016567e-3, 1.71010770699809e-5, 2.88228608102958e-6, 1.35875761753113e-7,
        4.81013719133561e-9, 1.57654868326862e-10, 5.02860947326766e-12,
    ],
    [
        3.95482973292588e-4, 3.95428369381889e-7, 1.50723175051937e-8, 1.77196118889e-10,
        1.56837043352454e-12, 1.43357548054723e-14, 1.1518563880486e-15,
    ],
    [
        2.16626102645875e-4, 2.08693610836974e-7, 8.56418957972949e-9, 1.00295494132041e-10,
        8.84237127962706e-13, 5.22498710964214e-15, 2.17187379192296e-15,
    ],
];

/// Two-stage Radau IIA, `k = 0..8`.
pub const RADAU2_STATE: [f64; 9] = [
    5.10276063376635e-3, 2.71426200869743e-4, 3.00121969695759e-5, 3.66833535128702e-6,
    4.57302841420496e-7, 5.72031598631257e-8, 7.15656456307633e-9, 8.95071321935005e-10,
    1.11917878304379e-10,
];

/// Three-stage Radau IIA, `k = 0..9`.
pub const RADAU3_STATE: [f64; 10] = [
    4.55449006945745e-4, 5.40504419193982e-6, 1.44285330140141e-7, 4.35666233007591e-9,
    1.3515744482234e-10, 4.21832815661686e-12, 1.3137749234417e-13, 3.29719416323593e-15,
    2.2377260456559e-15, 5.49532360539321e-15,
];

pub fn ladder(dt0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| dt0 / 2f64.powi(k as i32)).collect()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}
