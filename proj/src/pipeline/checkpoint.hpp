#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core/tensor.hpp"
#include "nn/adam.hpp"
#include "nn/ema.hpp"
#include "nn/layer.hpp"

namespace bsldm::pipeline {

// Single-file checkpoint: JSON metadata followed by named double tensors.
// Parameters, Adam moments and EMA shadows all travel as tensors so a resumed
// run continues bit-for-bit.
struct Checkpoint {
    nlohmann::json meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    void add(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }
    const Tensor* find(const std::string& name) const;
    const Tensor& need(const std::string& name) const;

    void save(const std::string& path) const;  // write tmp file then rename
    static Checkpoint load(const std::string& path);
};

// Parameter tensors under "<prefix>/<param name>".
void ck_put_params(Checkpoint& ck, const std::string& prefix, const std::vector<nn::Param*>& ps);
void ck_get_params(const Checkpoint& ck, const std::string& prefix, const std::vector<nn::Param*>& ps);

// Adam moments under "<prefix>/m/<param name>" etc.; step counter in meta.
void ck_put_adam(Checkpoint& ck, const std::string& prefix, const nn::Adam& opt,
                 const std::vector<nn::Param*>& ps);
void ck_get_adam(const Checkpoint& ck, const std::string& prefix, nn::Adam& opt,
                 const std::vector<nn::Param*>& ps);

void ck_put_ema(Checkpoint& ck, const std::string& prefix, const nn::Ema& ema,
                const std::vector<nn::Param*>& ps);
void ck_get_ema(const Checkpoint& ck, const std::string& prefix, nn::Ema& ema,
                const std::vector<nn::Param*>& ps);

}  // namespace bsldm::pipeline
