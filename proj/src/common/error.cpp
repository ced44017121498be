#include "situ/common/error.hpp"

namespace situ {

int exit_code(ErrorKind kind) { return static_cast<int>(kind); }

}  // namespace situ
