//! Problem constructors: the binomial coin-toss game, finite Wasserstein-ball
//! proxies around it, and the sign-of-returns market model.

pub mod binomial;
pub mod coin;
pub mod market;

pub use binomial::{binomial_pmf, wasserstein1_binomial, BinomialSpec};
pub use coin::{
    build_coin_problem, build_wasserstein_proxy, coin_reward, proxy_grid, CoinTossProblem,
    COIN_ACTIONS, COIN_FLIPS,
};
pub use market::{
    build_market_problem, empirical_frequencies, encode_market_states, market_state_index,
    signs_from_prices, smooth_probabilities, FrequencyTable, MarketModelSpec, MarketProbabilities,
    ReturnSeries, MARKET_ACTIONS,
};
