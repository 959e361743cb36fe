//! Published results for the nine built-in problems, used by `reproduce`.

use covsel::evaluation::Reference;

const fn r(h: f64, sample: f64, pcs_e: f64, pcs_min: f64) -> Reference {
    Reference {
        h,
        sample,
        pcs_e,
        pcs_min,
    }
}

/// Expectation-form targets; `[problem][0 = hom, 1 = het]`.
pub const EXPECTATION: [[Reference; 2]; 9] = [
    [r(3.423, 46_865.0, 0.9610, 0.7439), r(4.034, 65_138.0, 0.9801, 0.8080)],
    [r(2.363, 8_947.0, 0.9501, 0.8084), r(2.781, 12_380.0, 0.9702, 0.8517)],
    [r(3.822, 93_542.0, 0.9650, 0.7246), r(4.510, 130_200.0, 0.9842, 0.8052)],
    [r(3.423, 46_865.0, 0.9987, 0.9410), r(4.034, 65_138.0, 0.9994, 0.9615)],
    [r(3.423, 52_698.0, 0.9618, 0.7549), r(4.034, 73_265.0, 0.9807, 0.8147)],
    [r(3.423, 52_720.0, 0.9614, 0.7501), r(4.034, 73_246.0, 0.9806, 0.8114)],
    [r(3.423, 58_626.0, 0.9232, 0.6336), r(4.034, 81_555.0, 0.9846, 0.8591)],
    [r(4.612, 21_288.0, 0.9593, 0.7941), r(4.924, 24_266.0, 0.9662, 0.8223)],
    [r(2.141, 73_428.0, 0.9656, 0.7446), r(2.710, 117_630.0, 0.9895, 0.8379)],
];

/// Minimum-form targets.
pub const MINIMUM: [[Reference; 2]; 9] = [
    [r(5.927, 140_540.0, 0.9989, 0.9594), r(6.990, 195_340.0, 0.9997, 0.9825)],
    [r(4.362, 30_447.0, 0.9958, 0.9466), r(5.132, 42_164.0, 0.9987, 0.9701)],
    [r(6.481, 268_750.0, 0.9993, 0.9642), r(7.651, 374_720.0, 0.9999, 0.9849)],
    [r(5.927, 140_540.0, 1.0000, 0.9958), r(6.990, 195_340.0, 1.0000, 0.9981)],
    [r(5.927, 158_140.0, 0.9989, 0.9574), r(6.990, 219_870.0, 0.9998, 0.9862)],
    [r(5.927, 158_100.0, 0.9990, 0.9617), r(6.990, 219_740.0, 0.9998, 0.9826)],
    [r(5.927, 175_700.0, 0.9952, 0.8999), r(6.990, 244_490.0, 0.9999, 0.9899)],
    [r(7.155, 51_161.0, 0.9954, 0.9600), r(7.648, 58_493.0, 0.9971, 0.9708)],
    [r(3.792, 230_220.0, 0.9994, 0.9539), r(4.804, 369_310.0, 1.0000, 0.9907)],
];

/// Full-scale macro-replications and test covariates.
pub const FULL_REPLICATIONS: f64 = 1e4;
pub const FULL_TEST_POINTS: f64 = 1e5;
