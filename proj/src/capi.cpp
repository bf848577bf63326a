#include "xltk/xltk.h"

#include <iostream>
#include <string>

#include "app.hpp"
#include "errors.hpp"

struct xltk_config {
  xltk::Config cfg;
};

struct xltk_model {
  xltk::SavedModel saved;
};

namespace {

thread_local std::string g_last_error;

xltk_status fail(xltk_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
xltk_status guarded(F&& f) {
  try {
    return f();
  } catch (const xltk::ConfigError& e) {
    return fail(XLTK_ERR_CONFIG, e.what());
  } catch (const xltk::IoError& e) {
    return fail(XLTK_ERR_IO, e.what());
  } catch (const xltk::ParseError& e) {
    return fail(XLTK_ERR_PARSE, e.what());
  } catch (const xltk::SchemaError& e) {
    return fail(XLTK_ERR_SCHEMA, e.what());
  } catch (const xltk::DimensionError& e) {
    return fail(XLTK_ERR_DIMENSION, e.what());
  } catch (const xltk::IndexError& e) {
    return fail(XLTK_ERR_INDEX, e.what());
  } catch (const xltk::ContractError& e) {
    return fail(XLTK_ERR_CONTRACT, e.what());
  } catch (const xltk::SizeError& e) {
    return fail(XLTK_ERR_SIZE, e.what());
  } catch (const std::exception& e) {
    return fail(XLTK_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(XLTK_ERR_INTERNAL, "unknown error");
  }
}

#define XLTK_REQUIRE(ptr)                                                  \
  do {                                                                     \
    if (!(ptr)) return fail(XLTK_ERR_ARGUMENT, #ptr " must not be null"); \
  } while (0)

}  // namespace

extern "C" {

const char* xltk_last_error(void) { return g_last_error.c_str(); }

const char* xltk_status_name(xltk_status status) {
  switch (status) {
    case XLTK_OK: return "ok";
    case XLTK_CHECK_FAILED: return "check failed";
    case XLTK_ERR_CONFIG: return "config error";
    case XLTK_ERR_IO: return "io error";
    case XLTK_ERR_PARSE: return "parse error";
    case XLTK_ERR_SCHEMA: return "schema error";
    case XLTK_ERR_DIMENSION: return "dimension error";
    case XLTK_ERR_INDEX: return "index error";
    case XLTK_ERR_CONTRACT: return "contract error";
    case XLTK_ERR_SIZE: return "size error";
    case XLTK_ERR_ARGUMENT: return "argument error";
    case XLTK_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

int xltk_exit_code(xltk_status status) {
  if (status == XLTK_OK) return xltk::kExitOk;
  if (status == XLTK_CHECK_FAILED) return xltk::kExitCheckFailed;
  return xltk::kExitUsage;
}

xltk_status xltk_config_create(xltk_config** out) {
  XLTK_REQUIRE(out);
  return guarded([&] {
    *out = new xltk_config();
    return XLTK_OK;
  });
}

void xltk_config_destroy(xltk_config* cfg) { delete cfg; }

xltk_status xltk_config_load(xltk_config* cfg, const char* path) {
  XLTK_REQUIRE(cfg);
  XLTK_REQUIRE(path);
  return guarded([&] {
    cfg->cfg.merge_file(path);
    return XLTK_OK;
  });
}

xltk_status xltk_config_set(xltk_config* cfg, const char* key, const char* value) {
  XLTK_REQUIRE(cfg);
  XLTK_REQUIRE(key);
  XLTK_REQUIRE(value);
  return guarded([&] {
    cfg->cfg.set(key, value);
    return XLTK_OK;
  });
}

xltk_status xltk_config_assign(xltk_config* cfg, const char* assignment) {
  XLTK_REQUIRE(cfg);
  XLTK_REQUIRE(assignment);
  return guarded([&] {
    cfg->cfg.set_assignment(assignment);
    return XLTK_OK;
  });
}

xltk_status xltk_config_get(const xltk_config* cfg, const char* key, const char** value) {
  XLTK_REQUIRE(cfg);
  XLTK_REQUIRE(key);
  XLTK_REQUIRE(value);
  return guarded([&] {
    *value = cfg->cfg.get(key).c_str();
    return XLTK_OK;
  });
}

size_t xltk_config_key_count(void) { return xltk::config_schema().size(); }

const char* xltk_config_key_name(size_t index) {
  const auto& s = xltk::config_schema();
  return index < s.size() ? s[index].name.data() : nullptr;
}

const char* xltk_config_key_default(size_t index) {
  const auto& s = xltk::config_schema();
  return index < s.size() ? s[index].default_value.data() : nullptr;
}

const char* xltk_config_key_help(size_t index) {
  const auto& s = xltk::config_schema();
  return index < s.size() ? s[index].help.data() : nullptr;
}

const char* xltk_config_help(void) {
  static const std::string help = xltk::config_help();
  return help.c_str();
}

xltk_status xltk_run(const xltk_config* cfg, const char* command) {
  XLTK_REQUIRE(cfg);
  XLTK_REQUIRE(command);
  return guarded([&] {
    const std::string cmd = command;
    int code = 0;
    if (cmd == "train") code = xltk::run_train(cfg->cfg, std::cout);
    else if (cmd == "eval") code = xltk::run_eval(cfg->cfg, std::cout);
    else if (cmd == "gradcheck") code = xltk::run_gradcheck(cfg->cfg, std::cout);
    else if (cmd == "ablate") code = xltk::run_ablate(cfg->cfg, std::cout);
    else if (cmd == "gate-report") code = xltk::run_gate_report(cfg->cfg, std::cout);
    else if (cmd == "embed-stats") code = xltk::run_embed_stats(cfg->cfg, std::cout);
    else return fail(XLTK_ERR_ARGUMENT, "unknown command '" + cmd + "'");
    std::cout.flush();
    if (code == xltk::kExitCheckFailed) return fail(XLTK_CHECK_FAILED, cmd + ": check failed");
    return XLTK_OK;
  });
}

xltk_status xltk_run_split(const xltk_config* cfg, size_t synthetic) {
  XLTK_REQUIRE(cfg);
  return guarded([&] {
    xltk::run_split(cfg->cfg, synthetic, std::cout);
    std::cout.flush();
    return XLTK_OK;
  });
}

xltk_status xltk_model_load(const char* model_dir, xltk_model** out) {
  XLTK_REQUIRE(model_dir);
  XLTK_REQUIRE(out);
  return guarded([&] {
    auto* m = new xltk_model{xltk::load_model_dir(model_dir)};
    *out = m;
    return XLTK_OK;
  });
}

void xltk_model_destroy(xltk_model* model) { delete model; }

xltk_status xltk_model_predict(const xltk_model* model, const char* text, double probs[6]) {
  XLTK_REQUIRE(model);
  XLTK_REQUIRE(text);
  XLTK_REQUIRE(probs);
  return guarded([&] {
    const auto& s = model->saved;
    const xltk::TokenizerLimits limits{s.config.get_size("max_tokens"),
                                       s.config.get_size("max_chars")};
    const std::vector<xltk::TokenizedSample> one = {
        xltk::tokenize(xltk::normalize(text), s.vocab, s.chars, limits)};
    const auto p = xltk::predict(s.model, one, 1);
    for (std::size_t k = 0; k < xltk::kNumLabels; ++k) probs[k] = p[k];
    return XLTK_OK;
  });
}

size_t xltk_model_parameter_count(const xltk_model* model) {
  return model ? model->saved.model.trainable_count() : 0;
}

size_t xltk_label_count(void) { return xltk::kNumLabels; }

const char* xltk_label_name(size_t index) {
  return index < xltk::kNumLabels ? xltk::kLabelNames[index].data() : nullptr;
}

xltk_status xltk_parameter_count_for(const xltk_config* cfg, size_t vocab_size,
                                     size_t char_vocab_size, size_t* count) {
  XLTK_REQUIRE(cfg);
  XLTK_REQUIRE(count);
  return guarded([&] {
    xltk::ModelConfig mc = xltk::model_config_from(cfg->cfg);
    xltk::TrainConfig tc;
    xltk::apply_variant(cfg->cfg.get("variant"), mc, tc);
    mc.vocab_size = vocab_size;
    mc.char_vocab_size = char_vocab_size;
    mc.validate();
    *count = xltk::count_parameters(mc);
    return XLTK_OK;
  });
}

xltk_status xltk_debug_corrupt_adjoint(const char* op_name) {
  XLTK_REQUIRE(op_name);
  return guarded([&] {
    xltk::set_adjoint_fault(op_name);
    return XLTK_OK;
  });
}

}  // extern "C"
