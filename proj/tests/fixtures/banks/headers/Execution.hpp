#pragma once

#include "core/Tensor.hpp"

#include <vector>

namespace toy {

class Execution {
public:
    virtual ~Execution() = default;
    virtual int onResize(const std::vector<Tensor*>& inputs, const std::vector<Tensor*>& outputs) = 0;
    virtual int onExecute(const std::vector<Tensor*>& inputs, const std::vector<Tensor*>& outputs) = 0;
};

}  // namespace toy
