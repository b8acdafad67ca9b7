#pragma once

#include <exception>
#include <string_view>

#include "bdconv/error.hpp"
#include "bdconv/nigs1.hpp"

namespace bdconv::detail {

// Runs one sampler step, attributing any failure to it and notifying the
// optional hook on success.
struct StepRunner {
  const StepHook& hook;

  template <typename F>
  void operator()(std::string_view name, F&& step) const {
    try {
      step();
    } catch (const StepFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw StepFailure(std::string(name), e.what());
    }
    if (hook) hook(name);
  }
};

}  // namespace bdconv::detail
