// Copyright 2026 The SlideSpin Authors. All Rights Reserved.
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

#include <httplib.h>

#include "slidespin/zoo.hpp"

namespace slidespin {

std::string http_get(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::FetchError, "not a URL: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  if (!client.is_valid()) {
    throw Error(ErrorCode::FetchError, "unsupported URL scheme in " + url);
  }
  client.set_follow_location(true);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(120, 0);
  auto res = client.Get(path);
  if (!res) {
    throw Error(ErrorCode::FetchError,
                "GET " + url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::FetchError,
                "GET " + url + " returned HTTP " + std::to_string(res->status));
  }
  return std::move(res->body);
}

}  // namespace slidespin
