#include "solver_config.hpp"

#include <trimfit/error.hpp>

namespace trimfit::cli {

IltsConfig parse_ilts_config(const json& object, std::string_view context) {
  IltsConfig cfg;
  cfg.tau = get_number_or(object, "tau", cfg.tau, context);
  cfg.max_rounds = get_count_or(object, "max_rounds", cfg.max_rounds, context);
  cfg.tol = get_number_or(object, "tol", cfg.tol, context);
  cfg.rank_policy = parse_rank_policy(
      get_string_or(object, "rank_policy", std::string(to_string(cfg.rank_policy)), context));
  cfg.validate();
  return cfg;
}

GdConfig parse_gd_config(const json& object, std::string_view context) {
  GdConfig cfg;
  cfg.tau = get_number_or(object, "tau", cfg.tau, context);
  cfg.max_rounds = get_count_or(object, "max_rounds", cfg.max_rounds, context);
  cfg.tol = get_number_or(object, "tol", cfg.tol, context);
  if (object.contains("eta") && !object.at("eta").is_null()) cfg.eta = get_number(object, "eta", context);
  cfg.schedule = parse_schedule(
      get_string_or(object, "schedule", std::string(to_string(cfg.schedule)), context));
  cfg.fixed_steps = get_count_or(object, "steps", cfg.fixed_steps, context);
  cfg.w = get_number_or(object, "w", cfg.w, context);
  cfg.c_u = get_number_or(object, "c_u", cfg.c_u, context);
  cfg.max_inner_steps = get_count_or(object, "max_inner_steps", cfg.max_inner_steps, context);
  cfg.validate();
  return cfg;
}

GlobalConfig parse_global_config(const json& object, std::string_view context) {
  GlobalConfig cfg;
  cfg.m = get_count(object, "m", context);
  if (object.contains("tau_list")) cfg.tau_list = get_number_list(object.at("tau_list"), "tau_list");
  cfg.tau_grid_search = get_bool_or(object, "tau_grid_search", cfg.tau_grid_search, context);
  cfg.tau_grid_c = get_number_or(object, "tau_grid_c", cfg.tau_grid_c, context);
  if (object.contains("delta") && !object.at("delta").is_null()) {
    cfg.delta = get_number(object, "delta", context);
  }
  cfg.target_accuracy = get_number_or(object, "target_accuracy", cfg.target_accuracy, context);
  if (object.contains("radius") && !object.at("radius").is_null()) {
    cfg.radius = get_number(object, "radius", context);
  }
  cfg.candidate_budget = get_count_or(object, "candidate_budget", cfg.candidate_budget, context);
  cfg.epsilon_net = get_number_or(object, "epsilon_net", cfg.epsilon_net, context);
  cfg.seed = get_count_or(object, "seed", cfg.seed, context);
  cfg.ilts_max_rounds = get_count_or(object, "ilts_max_rounds", cfg.ilts_max_rounds, context);
  cfg.ilts_tol = get_number_or(object, "ilts_tol", cfg.ilts_tol, context);
  cfg.validate();
  return cfg;
}

}  // namespace trimfit::cli
