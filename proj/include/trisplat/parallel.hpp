// Copyright 2026 The trisplat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TRISPLAT_PARALLEL_HPP_
#define TRISPLAT_PARALLEL_HPP_

namespace trisplat {

// Number of OpenMP worker threads currently in use.
int worker_threads();

// Applies the TRISPLAT_THREADS cap, if set, to the OpenMP runtime. Returns
// the resulting thread count.
int configure_threads_from_env();

}  // namespace trisplat

#endif  // TRISPLAT_PARALLEL_HPP_
